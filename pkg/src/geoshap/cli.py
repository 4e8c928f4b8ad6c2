"""Command-line pipeline: synth -> tune/train -> explain -> report.

Exit codes: 0 success, 2 usage/config error, 3 engine precondition error,
4 transport error. All randomness flows from --seed; sub-seeds are derived by
labeled hashing so reruns with identical inputs are byte-identical.
"""

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import analytics, geojson
from .background import BackgroundSet
from .bridge import BridgeClient, BridgeConfig
from .config import ConfigError
from .data import Schema, load_csv, make_folds
from .errors import (
    BridgeTimeout,
    EmptyAfterFiltering,
    GeoShapError,
    InvalidK,
    InvalidSpec,
    MalformedCsv,
    MalformedReply,
    MissingColumn,
    RemoteModelError,
    TransportError,
    VersionMismatch,
)
from .explain import GeoShapleyExplainer
from .gbdt import GbdtParams, GradientBoostedRegressor
from .manifest import build_manifest, derive_seed
from .metrics import CSV_HEADER
from .records import ExplanationSet
from .selfcheck import run_selftest
from .synth import generate, load_spec
from .tuner import SearchSpace, tune

_USAGE_ERRORS = (
    ConfigError, InvalidSpec, MissingColumn, EmptyAfterFiltering,
    MalformedCsv, InvalidK, FileNotFoundError, IsADirectoryError,
)
_TRANSPORT_ERRORS = (
    TransportError, BridgeTimeout, VersionMismatch, MalformedReply,
    RemoteModelError,
)


def _range_pair(text):
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected 'lo,hi', got {text!r}")
    return parts


def build_parser():
    parser = argparse.ArgumentParser(
        prog="geoshap",
        description="Joint-location Shapley attribution pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic dataset with ground truth")
    p_synth.add_argument("--spec", required=True, help="synthetic spec file (key=value)")
    p_synth.add_argument("--out", required=True, help="output directory")
    p_synth.add_argument("--seed", type=int, default=None, help="override the spec seed")
    p_synth.set_defaults(func=cmd_synth)

    p_tune = sub.add_parser("tune", help="search hyperparameters by cross-validated loss")
    _add_data_args(p_tune)
    p_tune.add_argument("--budget", type=int, default=20, help="trial budget")
    p_tune.add_argument("--folds", type=int, default=10)
    p_tune.add_argument("--seed", type=int, default=0)
    p_tune.add_argument("--loss", choices=("mae", "mse"), default="mae")
    p_tune.add_argument("--out", required=True)
    p_tune.add_argument("--trees-range", type=_range_pair, default=None,
                        help="n_trees range 'lo,hi'")
    p_tune.add_argument("--depth-choices", default=None, help="e.g. '2,3,4'")
    p_tune.add_argument("--lr-range", type=_range_pair, default=None)
    p_tune.add_argument("--minleaf-range", type=_range_pair, default=None)
    p_tune.add_argument("--subsample-range", type=_range_pair, default=None)
    p_tune.set_defaults(func=cmd_tune)

    p_train = sub.add_parser("train", help="fit a model with explicit hyperparameters")
    _add_data_args(p_train)
    p_train.add_argument("--out", required=True)
    p_train.add_argument("--params-from", default=None,
                         help="tune_result.json to take best_params from")
    p_train.add_argument("--trees", type=int, default=100)
    p_train.add_argument("--depth", type=int, default=3)
    p_train.add_argument("--lr", type=float, default=0.1)
    p_train.add_argument("--minleaf", type=int, default=1)
    p_train.add_argument("--subsample", type=float, default=1.0)
    p_train.add_argument("--seed", type=int, default=0)
    p_train.set_defaults(func=cmd_train)

    p_explain = sub.add_parser("explain", help="explain model predictions per instance")
    _add_data_args(p_explain)
    p_explain.add_argument("--model", default=None, help="saved model file")
    p_explain.add_argument("--bridge-cmd", default=None,
                           help="external predictor launch command (stdio protocol)")
    p_explain.add_argument("--bridge-tcp", default=None, help="host:port of a protocol server")
    p_explain.add_argument("--mode", choices=("exact", "sampled"), default="exact")
    p_explain.add_argument("--budget", type=int, default=None,
                           help="coalition-evaluation budget (sampled mode)")
    p_explain.add_argument("--background", default="subsample:100",
                           help="subsample:M | centroids:M | file:PATH")
    p_explain.add_argument("--solver-tol", type=float, default=1e-8)
    p_explain.add_argument("--seed", type=int, default=0)
    p_explain.add_argument("--limit", type=int, default=None,
                           help="explain only the first N rows")
    p_explain.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    p_explain.add_argument("--timeout", type=float, default=30.0, help="bridge timeout (s)")
    p_explain.add_argument("--max-batch", type=int, default=1024, help="bridge batch rows")
    p_explain.add_argument("--out", required=True)
    p_explain.set_defaults(func=cmd_explain)

    p_report = sub.add_parser("report", help="summary products from explanations")
    p_report.add_argument("--explanations", required=True, help="explanations CSV")
    _add_data_args(p_report)
    p_report.add_argument("--out", required=True)
    p_report.add_argument("--top", type=int, default=8, help="features in donut totals")
    p_report.add_argument("--bootstrap", type=int, default=0,
                          help="background-bootstrap replicates (0 skips CIs)")
    p_report.add_argument("--level", type=float, default=0.95)
    p_report.add_argument("--seed", type=int, default=0)
    p_report.add_argument("--model", default=None,
                          help="saved model file (required when --bootstrap > 0)")
    p_report.add_argument("--svc-threshold", type=float, default=0.1,
                          help="mask SVC cells with |x - mean| below this * sd")
    p_report.add_argument("--include-phi0", action="store_true",
                          help="add the baseline to the SVC intercept surface")
    p_report.set_defaults(func=cmd_report)

    p_self = sub.add_parser("selftest", help="run the built-in analytic oracle suite")
    p_self.set_defaults(func=cmd_selftest)
    return parser


def _add_data_args(sub):
    sub.add_argument("--data", required=True, help="dataset CSV")
    sub.add_argument("--schema", default=None, help="schema config file")
    sub.add_argument("--features", default=None,
                     help="comma-separated feature columns (overrides the file)")
    sub.add_argument("--response", default=None, help="response column")
    sub.add_argument("--geo", default=None, help="comma-separated geo columns")
    sub.add_argument("--id-column", default=None, help="row id column")


def _outdir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _schema_from_args(args):
    """Schema from the config file with flag overrides; flags win."""
    from .config import name_list

    if args.schema is not None:
        base = Schema.from_config(args.schema)
        features = name_list(args.features) if args.features else base.feature_names
        response = args.response or base.response_name
        geo = name_list(args.geo) if args.geo else base.geo_names
        id_name = args.id_column or base.id_name
    else:
        if not (args.features and args.response and args.geo):
            raise ConfigError(
                "give --schema or all of --features/--response/--geo"
            )
        features = name_list(args.features)
        response = args.response
        geo = name_list(args.geo)
        id_name = args.id_column
    return Schema(features, response, geo, id_name=id_name)


def _load(args):
    schema = _schema_from_args(args)
    ds = load_csv(args.data, schema)
    if ds.dropped_count:
        print(f"dropped {ds.dropped_count} rows with missing/non-numeric cells",
              file=sys.stderr)
    return schema, ds


def cmd_synth(args):
    spec = load_spec(args.spec)
    if args.seed is not None:
        from .synth import SynthSpec

        spec = SynthSpec.from_dict({**spec.to_dict(), "seed": args.seed})
    out = _outdir(args)
    manifest = build_manifest(
        "synth", [args.spec], spec.seed, {"spec": spec.to_dict()}
    )
    ds, truth = generate(spec)
    ds.to_csv(out / "dataset.csv")
    truth.save(out / "truth.json")
    manifest.save(out / "manifest.json")
    print(f"run {manifest.run_id}: wrote dataset.csv ({ds.n} rows), truth.json")
    return 0


def _search_space(args):
    kwargs = {}
    if args.trees_range:
        kwargs["n_trees"] = tuple(int(v) for v in args.trees_range)
    if args.depth_choices:
        kwargs["max_depth"] = tuple(int(v) for v in args.depth_choices.split(","))
    if args.lr_range:
        kwargs["learning_rate"] = tuple(float(v) for v in args.lr_range)
    if args.minleaf_range:
        kwargs["min_samples_leaf"] = tuple(int(v) for v in args.minleaf_range)
    if args.subsample_range:
        kwargs["subsample"] = tuple(float(v) for v in args.subsample_range)
    return SearchSpace(**kwargs)


def cmd_tune(args):
    schema, ds = _load(args)
    space = _search_space(args)
    out = _outdir(args)
    manifest = build_manifest(
        "tune", [p for p in (args.data, args.schema) if p], args.seed,
        {
            "budget": args.budget, "folds": args.folds, "loss": args.loss,
            "space": {k: list(v) for k, v in space.__dict__.items()},
            "standardized": False, "budget_kind": "trials",
        },
    )
    folds = make_folds(ds.n, args.folds, derive_seed(args.seed, "folds"))
    result = tune(ds, space, args.budget, folds, loss=args.loss, seed=args.seed)

    with open(out / "tune_result.json", "w", encoding="utf-8") as fh:
        payload = result.to_json_dict()
        payload["run_id"] = manifest.run_id
        json.dump(payload, fh, indent=2, allow_nan=False)
        fh.write("\n")
    model = GradientBoostedRegressor(**result.best_params.as_dict()).fit(ds.X, ds.y)
    model.save(out / "best_model.json")
    _write_cv_csv(out / "cv_report.csv", manifest.run_id, ds, folds, result)
    manifest.save(out / "manifest.json")
    print(f"run {manifest.run_id}")
    print(result.summary())
    return 0


def _write_cv_csv(path, run_id, ds, folds, result):
    import csv as _csv

    from .metrics import cv_score

    def train(X, y):
        return GradientBoostedRegressor(**result.best_params.as_dict()).fit(X, y)

    fold_reports, pooled = cv_score(ds, folds, train, lambda m, X: m.predict(X))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# run_id: {run_id}\n")
        writer = _csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for fold, report in enumerate(fold_reports):
            writer.writerow(report.csv_row(run_id, fold))
        writer.writerow(pooled.csv_row(run_id, "pooled"))


def _params_from_args(args):
    if args.params_from:
        with open(args.params_from, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        return GbdtParams(**payload["best_params"])
    return GbdtParams(
        n_trees=args.trees, max_depth=args.depth, learning_rate=args.lr,
        min_samples_leaf=args.minleaf, subsample=args.subsample, seed=args.seed,
    )


def cmd_train(args):
    schema, ds = _load(args)
    params = _params_from_args(args)
    out = _outdir(args)
    manifest = build_manifest(
        "train", [p for p in (args.data, args.schema) if p], args.seed,
        {"params": params.as_dict(), "standardized": False},
    )
    model = GradientBoostedRegressor(**params.as_dict()).fit(ds.X, ds.y)
    model.save(out / "model.json")
    manifest.save(out / "manifest.json")
    print(f"run {manifest.run_id}: wrote model.json "
          f"(train mse {model.train_losses_[-1]:.6g})")
    return 0


def _background(args, ds, seed):
    kind, _, arg = args.background.partition(":")
    if kind == "subsample":
        return BackgroundSet.subsample(ds.X, int(arg or 100), seed)
    if kind == "centroids":
        return BackgroundSet.centroids(ds.X, int(arg or 10), seed)
    if kind == "file":
        bg_schema = Schema(ds.schema.feature_names, ds.schema.response_name,
                           ds.schema.geo_names)
        bg_ds = load_csv(arg, bg_schema)
        return BackgroundSet(bg_ds.X, "user-supplied")
    raise ConfigError(f"unknown background spec {args.background!r}")


def _predictor(args):
    sources = [s for s in (args.model, args.bridge_cmd, args.bridge_tcp) if s]
    if len(sources) != 1:
        raise ConfigError("give exactly one of --model, --bridge-cmd, --bridge-tcp")
    if args.model:
        return GradientBoostedRegressor.load(args.model), None
    if args.bridge_cmd:
        cfg = BridgeConfig(transport="stdio", command=tuple(args.bridge_cmd.split()),
                           timeout=args.timeout, max_batch=args.max_batch)
    else:
        host, _, port = args.bridge_tcp.partition(":")
        cfg = BridgeConfig(transport="tcp", host=host, port=int(port),
                           timeout=args.timeout, max_batch=args.max_batch)
    client = BridgeClient(cfg)
    client.handshake()
    return client.as_predictor(), client


def cmd_explain(args):
    schema, ds = _load(args)
    out = _outdir(args)
    inputs = [p for p in (args.data, args.schema, args.model) if p]
    manifest = build_manifest(
        "explain", inputs, args.seed,
        {
            "mode": args.mode, "budget": args.budget,
            "background": args.background, "solver_tol": args.solver_tol,
            "limit": args.limit,
            "bridge": args.bridge_cmd or args.bridge_tcp,
            "standardized": False,
        },
    )
    predictor, client = _predictor(args)
    try:
        bg = _background(args, ds, derive_seed(args.seed, "background"))
        explainer = GeoShapleyExplainer(
            predictor, bg, schema=schema, mode=args.mode, budget=args.budget,
            solver_tol=args.solver_tol, seed=derive_seed(args.seed, "patterns"),
            workers=args.workers,
        )
        X = ds.X if args.limit is None else ds.X[: args.limit]
        ids = ds.ids if args.limit is None else ds.ids[: args.limit]
        explset = explainer.explain_matrix(X, ids=ids)
    finally:
        if client is not None:
            client.close()
    explset = ExplanationSet(
        explset.schema, explset.X, explset.records,
        {**explset.metadata, "run_id": manifest.run_id},
    )
    explset.save(out / "explanations.csv")
    manifest.save(out / "manifest.json")
    print(f"run {manifest.run_id}: wrote explanations.csv ({explset.n} rows)")
    return 0


def cmd_report(args):
    schema, ds = _load(args)
    out = _outdir(args)
    inputs = [p for p in (args.explanations, args.data, args.schema) if p]
    if args.model:
        inputs.append(args.model)
    manifest = build_manifest(
        "report", inputs, args.seed,
        {"top": args.top, "bootstrap": args.bootstrap, "level": args.level,
         "svc_threshold": args.svc_threshold, "include_phi0": args.include_phi0},
    )
    run_id = manifest.run_id

    explset = ExplanationSet.read(args.explanations).with_instances(ds)

    ci = None
    if args.bootstrap > 0:
        if not args.model:
            raise ConfigError("--bootstrap needs --model to recompute explanations")
        model = GradientBoostedRegressor.load(args.model)
        meta = explset.metadata
        bg_meta = meta.get("background", {})
        if bg_meta.get("provenance") == "subsample":
            bg = BackgroundSet.subsample(ds.X, bg_meta["m"], bg_meta["seed"])
        else:
            raise ConfigError(
                "bootstrap can only rebuild subsample backgrounds; re-run "
                "explain with --background subsample:M"
            )
        explainer = GeoShapleyExplainer(
            model, bg, schema=schema,
            mode=meta.get("estimator", "exact"), budget=meta.get("budget"),
            solver_tol=meta.get("solver_tol", 1e-8), seed=meta.get("seed", 0),
        )
        ci = analytics.bootstrap_ci(
            explainer, explset.X, B=args.bootstrap, level=args.level,
            seed=args.seed, ids=[r.id for r in explset.records],
        )
        ci.to_csv(out / "bootstrap_ci.csv", ids=[r.id for r in explset.records],
                  run_id=run_id)

    split = analytics.importance_split(explset, top_n=args.top)
    split.to_csv(out / "importance.csv", run_id=run_id)

    for feature in explset.scalar_names:
        curve = analytics.partial_dependence(explset, feature, ci=ci)
        curve.to_csv(out / f"pdp_{feature}.csv", run_id=run_id)

    means = analytics.background_means(explset)
    surface = analytics.svc_surface(
        explset, means, sd_threshold=args.svc_threshold,
        include_phi0=args.include_phi0, ci=ci,
    )
    surface.to_csv(out / "svc.csv", run_id=run_id)
    geojson.export_geojson(surface, out / "svc.geojson", run_id=run_id)
    manifest.save(out / "manifest.json")
    made = ["importance.csv", "pdp_*.csv", "svc.csv", "svc.geojson"]
    if ci is not None:
        made.append("bootstrap_ci.csv")
    print(f"run {run_id}: wrote {', '.join(made)}")
    return 0


def cmd_selftest(args):
    failures = run_selftest()
    return 0 if failures == 0 else 1


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args) or 0
    except _USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except _TRANSPORT_ERRORS as exc:
        print(f"transport error: {exc}", file=sys.stderr)
        return 4
    except (GeoShapError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
