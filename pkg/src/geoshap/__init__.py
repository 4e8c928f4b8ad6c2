"""Joint-location Shapley attribution for spatial tabular regression.

Decomposes a model prediction into a baseline, per-feature effects, an
intrinsic location effect from the coordinate columns acting as one joint
player, and location-feature synergy effects, plus the downstream products:
importance splits, partial-dependence curves with bootstrap significance,
and spatially varying coefficient surfaces. Ships a self-contained
gradient-boosted tree model, a tuner, and a wire bridge for external models.
"""

__version__ = "0.1.0"

from .analytics import (
    BootstrapResult,
    ImportanceSplit,
    PdpCurve,
    SvcSurface,
    bootstrap_ci,
    importance_split,
    partial_dependence,
    svc_surface,
)
from .background import BackgroundSet
from .bridge import BridgeClient, BridgeConfig
from .coalitions import CoalitionSpace, coalition_weight_feature, coalition_weight_pair
from .data import Dataset, FoldPlan, Schema, load_csv, make_folds, reassemble, split_geo
from .explain import (
    GeoShapleyExplainer,
    eval_coalition,
    explain_exact,
    explain_sampled,
    shap_classic,
)
from .gbdt import GbdtParams, GradientBoostedRegressor
from .geojson import export_geojson
from .metrics import MetricReport, cv_score, mae, mse, r2
from .predictor import Predictor, as_predictor
from .records import ClassicExplanation, ExplanationRecord, ExplanationSet
from .synth import GroundTruth, SynthSpec, generate, truth_predictor
from .tuner import SearchSpace, TuneResult, tune

__all__ = [
    "BackgroundSet", "BootstrapResult", "BridgeClient", "BridgeConfig",
    "ClassicExplanation", "CoalitionSpace", "Dataset", "ExplanationRecord",
    "ExplanationSet", "FoldPlan", "GbdtParams", "GeoShapleyExplainer",
    "GradientBoostedRegressor", "GroundTruth", "ImportanceSplit",
    "MetricReport", "PdpCurve", "Predictor", "Schema", "SearchSpace",
    "SvcSurface", "SynthSpec", "TuneResult", "as_predictor", "bootstrap_ci",
    "coalition_weight_feature", "coalition_weight_pair", "cv_score",
    "eval_coalition", "explain_exact", "explain_sampled", "export_geojson",
    "generate", "importance_split", "load_csv", "mae", "make_folds", "mse",
    "partial_dependence", "r2", "reassemble", "shap_classic", "split_geo",
    "svc_surface", "truth_predictor", "tune",
]
