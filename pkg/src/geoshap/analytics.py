"""Summary products over explanation records: importance split, partial
dependence, background-bootstrap confidence intervals, SVC surfaces."""

import csv
import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_matrix, check_seed
from .background import BackgroundSet
from .errors import EmptyRecords, GeoShapError, MissingGeo, UnknownFeature
from .records import component_names

MASK_NEAR_MEAN = "near-mean-denominator"
MASK_INSIGNIFICANT = "insignificant"


def _scalar_names(schema):
    return tuple(n for n in schema.feature_names if n not in schema.geo_names)


def _stack(records):
    if not records:
        raise EmptyRecords("no explanation records")
    phi = np.stack([r.phi for r in records])
    pgx = np.stack([r.phi_geo_x for r in records])
    phi_geo = np.array([r.phi_geo for r in records])
    return phi, pgx, phi_geo


# --- importance ------------------------------------------------------------

@dataclass(frozen=True)
class ImportanceRow:
    name: str
    invariant: float  # mean |phi_j|, the location-invariant share
    varying: float    # mean |phi_geo_x_j| (for GEO: mean |phi_geo|)
    rank: int

    @property
    def total(self):
        return self.invariant + self.varying


@dataclass(frozen=True)
class ImportanceSplit:
    rows: tuple  # ImportanceRow sorted by rank (GEO row included)
    donut_invariant_total: float
    donut_varying_total: float
    top_n: int

    def by_name(self, name):
        for row in self.rows:
            if row.name == name:
                return row
        raise UnknownFeature(name)

    def to_csv(self, path, run_id=None):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            if run_id:
                fh.write(f"# run_id: {run_id}\n")
            writer = csv.writer(fh)
            writer.writerow(["rank", "feature", "invariant", "varying", "total"])
            for row in self.rows:
                writer.writerow([
                    row.rank, row.name, repr(row.invariant), repr(row.varying),
                    repr(row.total),
                ])
            writer.writerow([])
            writer.writerow(["donut_invariant_total", repr(self.donut_invariant_total)])
            writer.writerow(["donut_varying_total", repr(self.donut_varying_total)])
            writer.writerow(["top_n", self.top_n])


def importance_split(explset, top_n=8):
    """Per-feature mean |main| and |synergy| magnitudes plus the GEO row.

    The GEO row's magnitude counts on the location-varying side. Donut totals
    sum each side over the top_n rows by total. Rank ties break by roster
    order (GEO last).
    """
    records = explset.records
    phi, pgx, phi_geo = _stack(records)
    names = list(_scalar_names(explset.schema)) + ["GEO"]

    def col_means(M):
        # fsum is exactly rounded, so the split is bit-identical under any
        # permutation of the records
        return [math.fsum(np.abs(M[:, j])) / M.shape[0] for j in range(M.shape[1])]

    invariant = col_means(phi) + [0.0]
    varying = col_means(pgx) + [math.fsum(np.abs(phi_geo)) / len(records)]

    order = sorted(
        range(len(names)),
        key=lambda i: (-(invariant[i] + varying[i]), i),
    )
    rows = tuple(
        ImportanceRow(names[i], float(invariant[i]), float(varying[i]), rank)
        for rank, i in enumerate(order)
    )
    top = rows[: top_n]
    return ImportanceSplit(
        rows=rows,
        donut_invariant_total=float(sum(r.invariant for r in top)),
        donut_varying_total=float(sum(r.varying for r in top)),
        top_n=min(top_n, len(rows)),
    )


# --- partial dependence ----------------------------------------------------

@dataclass(frozen=True)
class PdpPoint:
    x: float
    effect: float
    ci_low: float = None
    ci_high: float = None
    significant: bool = None


@dataclass(frozen=True)
class PdpCurve:
    feature: str
    points: tuple  # sorted by x

    def xs(self):
        return np.array([pt.x for pt in self.points])

    def effects(self):
        return np.array([pt.effect for pt in self.points])

    def to_csv(self, path, run_id=None):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            if run_id:
                fh.write(f"# run_id: {run_id}\n")
            writer = csv.writer(fh)
            writer.writerow(["x", "effect", "ci_low", "ci_high", "significant"])
            for pt in self.points:
                writer.writerow([
                    repr(pt.x), repr(pt.effect),
                    "" if pt.ci_low is None else repr(pt.ci_low),
                    "" if pt.ci_high is None else repr(pt.ci_high),
                    "" if pt.significant is None else int(pt.significant),
                ])


def partial_dependence(explset, feature, ci=None, effect="total"):
    """Per-instance scatter of feature value against its attribution.

    effect="total" uses main + synergy (the default decomposition view);
    effect="main" plots the location-invariant part alone for comparison
    against flat per-column attribution.
    """
    names = _scalar_names(explset.schema)
    if feature not in names:
        raise UnknownFeature(feature)
    j = names.index(feature)
    col = explset.schema.feature_names.index(feature)
    xs = explset.X[:, col]
    if np.isnan(xs).any():
        raise GeoShapError(
            "explanation set lacks instance values; attach them with "
            "with_instances(dataset)"
        )
    phi, pgx, _ = _stack(explset.records)
    eff = phi[:, j] + pgx[:, j] if effect == "total" else phi[:, j]

    lo = hi = sig = None
    if ci is not None:
        lo, hi = ci.effect_interval(feature)
        sig = (lo > 0) | (hi < 0)

    order = np.argsort(xs, kind="stable")
    points = []
    for i in order:
        points.append(PdpPoint(
            x=float(xs[i]),
            effect=float(eff[i]),
            ci_low=None if lo is None else float(lo[i]),
            ci_high=None if hi is None else float(hi[i]),
            significant=None if sig is None else bool(sig[i]),
        ))
    return PdpCurve(feature=feature, points=tuple(points))


# --- bootstrap -------------------------------------------------------------

@dataclass(frozen=True)
class BootstrapResult:
    """Percentile intervals per instance and component from background
    resampling; ``samples`` holds the raw replicate components."""

    component_names: tuple
    point: np.ndarray      # (n, C) full-background estimate
    low: np.ndarray        # (n, C)
    high: np.ndarray       # (n, C)
    samples: np.ndarray    # (B_ok, n, C)
    level: float
    n_failed: int
    scalar_names: tuple = ()

    @property
    def significant(self):
        return (self.low > 0) | (self.high < 0)

    def _component_index(self, name):
        try:
            return self.component_names.index(name)
        except ValueError:
            raise UnknownFeature(name) from None

    def interval(self, name):
        j = self._component_index(name)
        return self.low[:, j], self.high[:, j]

    def effect_interval(self, feature):
        """Interval for the total attribution phi_j + phi_geo_x_j."""
        a = self._component_index(f"phi:{feature}")
        b = self._component_index(f"phi_geo_x:{feature}")
        sums = self.samples[:, :, a] + self.samples[:, :, b]
        alpha = (1.0 - self.level) / 2.0
        return (
            np.quantile(sums, alpha, axis=0),
            np.quantile(sums, 1.0 - alpha, axis=0),
        )

    def to_csv(self, path, ids=None, run_id=None):
        n = self.point.shape[0]
        ids = ids or [str(i) for i in range(n)]
        with open(path, "w", encoding="utf-8", newline="") as fh:
            if run_id:
                fh.write(f"# run_id: {run_id}\n")
            writer = csv.writer(fh)
            writer.writerow(["id", "component", "point", "ci_low", "ci_high", "significant"])
            sig = self.significant
            for i in range(n):
                for j, comp in enumerate(self.component_names):
                    writer.writerow([
                        ids[i], comp, repr(float(self.point[i, j])),
                        repr(float(self.low[i, j])), repr(float(self.high[i, j])),
                        int(sig[i, j]),
                    ])


def bootstrap_ci(explainer, X, B=100, level=0.95, seed=0, ids=None):
    """Background-bootstrap intervals for every component of every instance.

    Resamples the explainer's background with replacement B times and
    re-explains; coalition sampling (if any) is held fixed so the intervals
    isolate background uncertainty. Replicates that raise are recorded; more
    than 10% failures aborts.
    """
    if B < 20:
        raise ValueError(f"bootstrap needs B >= 20 replicates, got {B}")
    seed = check_seed(seed)
    X = check_matrix(X, n_cols=explainer.space.p, name="X", allow_empty=False)

    point_set = explainer.explain_matrix(X, ids=ids)
    point = np.stack([r.components() for r in point_set.records])

    stacks = []
    n_failed = 0
    errors = []
    for rep in range(B):
        rep_bg = explainer.background.resample(_replicate_seed(seed, rep))
        rep_explainer = _with_background(explainer, rep_bg)
        try:
            rep_set = rep_explainer.explain_matrix(X, ids=ids)
        except GeoShapError as exc:
            n_failed += 1
            errors.append(f"replicate {rep}: {exc}")
            continue
        stacks.append(np.stack([r.components() for r in rep_set.records]))
    if n_failed > 0.1 * B:
        raise GeoShapError(
            f"{n_failed}/{B} bootstrap replicates failed: {errors[:3]}"
        )
    samples = np.stack(stacks)
    alpha = (1.0 - level) / 2.0
    low = np.quantile(samples, alpha, axis=0)
    high = np.quantile(samples, 1.0 - alpha, axis=0)
    return BootstrapResult(
        component_names=tuple(component_names(point_set.schema)),
        point=point,
        low=low,
        high=high,
        samples=samples,
        level=level,
        n_failed=n_failed,
        scalar_names=_scalar_names(point_set.schema),
    )


def _replicate_seed(seed, rep):
    from .manifest import derive_seed

    return derive_seed(seed, f"bootstrap:{rep}")


def _with_background(explainer, bg):
    from .explain import GeoShapleyExplainer

    return GeoShapleyExplainer(
        explainer.predictor, bg,
        schema=explainer.schema,
        geo_cols=None if explainer.schema is not None else explainer.space.geo_cols,
        mode=explainer.mode, budget=explainer.budget,
        solver_tol=explainer.solver_tol, seed=explainer.seed,
        exact_cap=explainer.exact_cap, workers=explainer.workers,
        block_size=explainer.block_size, max_eval_rows=explainer.max_eval_rows,
    )


# --- SVC surfaces ----------------------------------------------------------

@dataclass(frozen=True)
class SvcCell:
    value: float = None
    mask_reason: str = None

    @property
    def masked(self):
        return self.value is None


@dataclass(frozen=True)
class SvcSurface:
    """Per-instance local intercept and per-feature local coefficients."""

    geo_names: tuple
    locations: np.ndarray   # (n, g)
    intercept: np.ndarray   # (n,)
    feature_names: tuple
    cells: tuple            # n tuples of SvcCell per feature
    include_phi0: bool = False
    ids: tuple = ()

    def coefficients(self, feature):
        """(values with NaN at masks, mask-reason list) for one feature."""
        j = self.feature_names.index(feature)
        vals = np.array([
            np.nan if row[j].masked else row[j].value for row in self.cells
        ])
        reasons = [row[j].mask_reason for row in self.cells]
        return vals, reasons

    def to_csv(self, path, run_id=None):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            if run_id:
                fh.write(f"# run_id: {run_id}\n")
            writer = csv.writer(fh)
            header = ["id"] + list(self.geo_names) + ["intercept"]
            for name in self.feature_names:
                header += [f"coef_{name}", f"coef_{name}_mask"]
            writer.writerow(header)
            ids = self.ids or tuple(str(i) for i in range(len(self.cells)))
            for i, row in enumerate(self.cells):
                out = [ids[i]] + [repr(float(v)) for v in self.locations[i]]
                out.append(repr(float(self.intercept[i])))
                for cell in row:
                    out += ["" if cell.masked else repr(cell.value),
                            cell.mask_reason or ""]
                writer.writerow(out)


def svc_surface(explset, feature_means, sd_threshold=0.1, include_phi0=False,
                ci=None):
    """Locally varying coefficients from attribution ratios.

    The intercept surface is the intrinsic location effect (optionally offset
    by the baseline). Per-feature coefficients are (phi_j + phi_geo_x_j) /
    (x_ij - mean_j), masked near the background mean (|x - mean| <
    sd_threshold * sd(x)) and, when intervals are supplied, where the total
    effect is insignificant.
    """
    records = explset.records
    if not records:
        raise EmptyRecords("no explanation records")
    if not explset.schema.geo_names:
        raise MissingGeo("schema has no geo columns")
    names = _scalar_names(explset.schema)
    feature_means = np.asarray(feature_means, dtype=np.float64)
    if feature_means.shape != (len(names),):
        raise ValueError(
            f"feature_means must have length {len(names)} (scalar features)"
        )
    phi, pgx, _ = _stack(records)
    scalar_cols = [explset.schema.feature_names.index(n) for n in names]
    X = explset.X[:, scalar_cols]
    if np.isnan(X).any():
        raise GeoShapError(
            "explanation set lacks instance values; attach them with "
            "with_instances(dataset)"
        )
    sds = X.std(axis=0)
    effects = phi + pgx
    denom = X - feature_means[None, :]

    sig = None
    if ci is not None:
        sig = np.column_stack([
            _effect_significant(ci, name) for name in names
        ])

    intercept = np.array([r.phi_geo + (r.phi0 if include_phi0 else 0.0)
                          for r in records])
    locations = np.array([r.location for r in records])

    cells = []
    for i in range(len(records)):
        row = []
        for j in range(len(names)):
            if abs(denom[i, j]) < sd_threshold * sds[j]:
                row.append(SvcCell(mask_reason=MASK_NEAR_MEAN))
            elif sig is not None and not sig[i, j]:
                row.append(SvcCell(mask_reason=MASK_INSIGNIFICANT))
            else:
                row.append(SvcCell(value=float(effects[i, j] / denom[i, j])))
        cells.append(tuple(row))
    return SvcSurface(
        geo_names=explset.schema.geo_names,
        locations=locations,
        intercept=intercept,
        feature_names=names,
        cells=tuple(cells),
        include_phi0=include_phi0,
        ids=tuple(r.id for r in records),
    )


def _effect_significant(ci, feature):
    lo, hi = ci.effect_interval(feature)
    return (lo > 0) | (hi < 0)


def background_means(explset_or_bg, schema=None):
    """Scalar-feature means of a background set aligned to a schema."""
    if isinstance(explset_or_bg, BackgroundSet):
        means = explset_or_bg.column_means()
        if schema is None:
            raise ValueError("schema required with a BackgroundSet")
    else:
        means = np.asarray(explset_or_bg.metadata["background"]["column_means"])
        schema = explset_or_bg.schema
    scalar_cols = [
        schema.feature_names.index(n)
        for n in schema.feature_names
        if n not in schema.geo_names
    ]
    return means[scalar_cols]
