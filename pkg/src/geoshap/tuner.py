"""Bounded hyperparameter search minimizing cross-validated loss.

Seeded random search with one successive-halving stage: early trials run with
n_trees capped at 25%, survivors re-run at full strength. Trial-count budget,
not wall-clock. Ties break by trial order.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_seed
from .errors import GeoShapError
from .gbdt import GbdtParams, GradientBoostedRegressor
from .metrics import cv_score

LOSSES = ("mae", "mse")


@dataclass(frozen=True)
class SearchSpace:
    """Ranges/choices per hyperparameter. Ranges are inclusive."""

    n_trees: tuple = (50, 300)
    max_depth: tuple = (2, 3, 4)
    learning_rate: tuple = (0.03, 0.3)  # sampled log-uniform
    min_samples_leaf: tuple = (1, 20)
    subsample: tuple = (0.7, 1.0)

    def __post_init__(self):
        if not (1 <= self.n_trees[0] <= self.n_trees[1]):
            raise ValueError(f"bad n_trees range {self.n_trees}")
        if not self.max_depth or any(d < 1 for d in self.max_depth):
            raise ValueError(f"bad max_depth choices {self.max_depth}")
        lo, hi = self.learning_rate
        if not (0.0 < lo <= hi <= 1.0):
            raise ValueError(f"bad learning_rate range {self.learning_rate}")
        if not (1 <= self.min_samples_leaf[0] <= self.min_samples_leaf[1]):
            raise ValueError(f"bad min_samples_leaf range {self.min_samples_leaf}")
        lo, hi = self.subsample
        if not (0.0 < lo <= hi <= 1.0):
            raise ValueError(f"bad subsample range {self.subsample}")

    def default_params(self, seed=0):
        """The designated default configuration (range midpoints)."""
        return GbdtParams(
            n_trees=int(round((self.n_trees[0] + self.n_trees[1]) / 2)),
            max_depth=self.max_depth[len(self.max_depth) // 2],
            learning_rate=float(math.sqrt(self.learning_rate[0] * self.learning_rate[1])),
            min_samples_leaf=int(round((self.min_samples_leaf[0] + self.min_samples_leaf[1]) / 2)),
            subsample=float((self.subsample[0] + self.subsample[1]) / 2),
            seed=seed,
        )

    def sample(self, rng, seed=0):
        return GbdtParams(
            n_trees=int(rng.integers(self.n_trees[0], self.n_trees[1] + 1)),
            max_depth=int(self.max_depth[rng.integers(0, len(self.max_depth))]),
            learning_rate=float(np.exp(rng.uniform(
                np.log(self.learning_rate[0]), np.log(self.learning_rate[1])))),
            min_samples_leaf=int(rng.integers(
                self.min_samples_leaf[0], self.min_samples_leaf[1] + 1)),
            subsample=float(rng.uniform(self.subsample[0], self.subsample[1])),
            seed=seed,
        )


@dataclass(frozen=True)
class Trial:
    index: int
    params: GbdtParams
    loss: float  # +inf for failed trials
    report: object = None  # pooled MetricReport, None when failed
    stage: str = "full"  # "default" | "capped" | "full"
    error: str = None

    @property
    def failed(self):
        return self.error is not None


@dataclass(frozen=True)
class TuneResult:
    best_params: GbdtParams
    best_cv: object
    trials: tuple
    budget_used: int
    seed: int
    loss: str
    metadata: dict = field(default_factory=dict)

    def to_json_dict(self):
        return {
            "loss": self.loss,
            "seed": self.seed,
            "budget_used": self.budget_used,
            "metadata": dict(self.metadata),
            "best_params": self.best_params.as_dict(),
            "best_cv": None if self.best_cv is None else {
                "mae": self.best_cv.mae, "mse": self.best_cv.mse,
                "r2": self.best_cv.r2, "n": self.best_cv.n,
            },
            "trials": [
                {
                    "index": t.index,
                    "params": t.params.as_dict(),
                    "loss": None if not np.isfinite(t.loss) else t.loss,
                    "stage": t.stage,
                    "error": t.error,
                }
                for t in self.trials
            ],
        }

    def to_json(self):
        return json.dumps(self.to_json_dict(), indent=2, allow_nan=False)

    def summary(self):
        lines = [
            f"trials run: {self.budget_used} (selection loss: {self.loss})",
            f"best pooled {self.loss}: {min(t.loss for t in self.trials):.6g}",
            f"best params: {self.best_params.as_dict()}",
        ]
        if self.best_cv is not None:
            lines.append(
                f"best cv: mae={self.best_cv.mae:.6g} mse={self.best_cv.mse:.6g} "
                f"r2={self.best_cv.r2:.6g}"
            )
        return "\n".join(lines)


def _evaluate(ds, folds, params, loss):
    def train(X, y):
        return GradientBoostedRegressor(**params.as_dict()).fit(X, y)

    def predict(model, X):
        return model.predict(X)

    _, pooled = cv_score(ds, folds, train, predict)
    return (pooled.mae if loss == "mae" else pooled.mse), pooled


def tune(ds, space, budget, folds, loss="mae", seed=0):
    """Search the space within a trial budget; returns the loss argmin.

    Trial 0 is always the space's default configuration. Failed trials are
    recorded with the training error and count against the budget.
    """
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    if loss not in LOSSES:
        raise ValueError(f"loss must be one of {LOSSES}, got {loss!r}")
    seed = check_seed(seed)
    rng = np.random.default_rng(seed)

    candidates = [("default", space.default_params(seed=seed), None)]
    remaining = budget - 1
    n_capped = 0
    sampled = [space.sample(rng, seed=seed) for _ in range(max(0, remaining))]
    if 0 < remaining < 4:
        candidates += [("full", p, None) for p in sampled]
    elif remaining >= 4:
        # successive halving: 2/3 of the remaining budget runs capped,
        # the best survivors re-run at their full sampled n_trees
        n_capped = int(math.ceil(remaining * 2 / 3))
        for p in sampled[:n_capped]:
            capped = GbdtParams(**{
                **p.as_dict(),
                "n_trees": max(1, int(round(p.n_trees * 0.25))),
            })
            candidates.append(("capped", capped, p))

    trials = []
    originals = {}
    for stage, params, original in candidates:
        trial = _run_trial(ds, folds, params, loss, len(trials), stage)
        trials.append(trial)
        if original is not None:
            originals[trial.index] = original

    if remaining >= 4:
        n_rerun = remaining - n_capped
        capped_trials = [t for t in trials if t.stage == "capped"]
        survivors = sorted(capped_trials, key=lambda t: (t.loss, t.index))[:n_rerun]
        for survivor in survivors:
            full = originals[survivor.index]
            trials.append(_run_trial(ds, folds, full, loss, len(trials), "full"))

    ok = [t for t in trials if not t.failed]
    if not ok:
        raise GeoShapError("every tuning trial failed")
    best = min(ok, key=lambda t: (t.loss, t.index))
    return TuneResult(
        best_params=best.params,
        best_cv=best.report,
        trials=tuple(trials),
        budget_used=len(trials),
        seed=seed,
        loss=loss,
        metadata={"budget_kind": "trials", "folds": folds.k},
    )


def _run_trial(ds, folds, params, loss, index, stage):
    try:
        loss_value, pooled = _evaluate(ds, folds, params, loss)
    except GeoShapError as exc:
        return Trial(index=index, params=params, loss=float("inf"),
                     stage=stage, error=str(exc))
    return Trial(index=index, params=params, loss=loss_value,
                 report=pooled, stage=stage)
