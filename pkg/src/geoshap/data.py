"""Tabular spatial datasets: schema, CSV ingestion, folds, geo/non-geo split.

Column order everywhere is schema order, not file order, so feature indices
are stable across ingestion, modeling, and explanation outputs.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from . import config as kvconfig
from ._validation import check_seed
from .errors import EmptyAfterFiltering, InvalidK, MalformedCsv, MissingColumn


@dataclass(frozen=True)
class Schema:
    """Variable roster: all feature columns (geo included), response, geo names.

    ``feature_names`` lists every model input column in order; ``geo_names``
    marks the subset forming the joint location player (default two
    coordinate columns).
    """

    feature_names: tuple
    response_name: str
    geo_names: tuple
    id_name: str = None
    units: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "geo_names", tuple(self.geo_names))
        names = list(self.feature_names) + [self.response_name]
        if self.id_name is not None:
            names.append(self.id_name)
        if len(set(names)) != len(names):
            raise ValueError(f"column names are not unique: {names}")
        if len(self.geo_names) < 1:
            raise ValueError("at least one geo column is required")
        missing = [g for g in self.geo_names if g not in self.feature_names]
        if missing:
            raise ValueError(f"geo columns not among feature columns: {missing}")
        if self.response_name in self.geo_names:
            raise ValueError("response column cannot be a geo column")

    @property
    def p(self):
        return len(self.feature_names)

    @property
    def g(self):
        return len(self.geo_names)

    @property
    def geo_indices(self):
        return tuple(self.feature_names.index(g) for g in self.geo_names)

    @property
    def nonspatial_names(self):
        geo = set(self.geo_names)
        return tuple(n for n in self.feature_names if n not in geo)

    @property
    def nonspatial_indices(self):
        geo = set(self.geo_indices)
        return tuple(i for i in range(self.p) if i not in geo)

    @classmethod
    def from_config(cls, path):
        cfg = kvconfig.load_kv(path)
        features = kvconfig.name_list(kvconfig.single(cfg, "features", required=True))
        response = kvconfig.single(cfg, "response", required=True)
        geo = kvconfig.name_list(kvconfig.single(cfg, "geo", required=True))
        id_name = kvconfig.single(cfg, "id")
        return cls(features, response, geo, id_name=id_name)


@dataclass(frozen=True)
class Dataset:
    """Immutable numeric table: n x p feature matrix plus response vector."""

    schema: Schema
    X: np.ndarray
    y: np.ndarray
    ids: tuple
    dropped_count: int = 0

    def __post_init__(self):
        X = np.ascontiguousarray(self.X, dtype=np.float64)
        y = np.ascontiguousarray(self.y, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.schema.p:
            raise ValueError(
                f"X shape {X.shape} does not match schema with p={self.schema.p}"
            )
        if y.shape != (X.shape[0],):
            raise ValueError("y length does not match X rows")
        if X.shape[0] < 1:
            raise EmptyAfterFiltering("dataset has no rows")
        if not (np.isfinite(X).all() and np.isfinite(y).all()):
            raise ValueError("dataset contains NaN or infinite values")
        X.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "ids", tuple(str(i) for i in self.ids))
        if len(self.ids) != X.shape[0]:
            raise ValueError("ids length does not match X rows")

    @property
    def n(self):
        return self.X.shape[0]

    def to_csv(self, path):
        """Write in the standard ingestion format (schema order + response)."""
        header = list(self.schema.feature_names) + [self.schema.response_name]
        id_col = self.schema.id_name
        if id_col is not None:
            header = [id_col] + header
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for i in range(self.n):
                row = [repr(float(v)) for v in self.X[i]] + [repr(float(self.y[i]))]
                if id_col is not None:
                    row = [self.ids[i]] + row
                writer.writerow(row)


@dataclass(frozen=True)
class FoldPlan:
    """Balanced k-way partition of row indices, deterministic in the seed."""

    k: int
    assignments: np.ndarray
    seed: int

    def __post_init__(self):
        a = np.ascontiguousarray(self.assignments, dtype=np.int64)
        a.flags.writeable = False
        object.__setattr__(self, "assignments", a)

    @property
    def n(self):
        return self.assignments.shape[0]

    def fold_indices(self, fold):
        return np.nonzero(self.assignments == fold)[0]


def _parse_cell(text):
    text = text.strip()
    if not text:
        return None
    try:
        value = float(text)
    except ValueError:
        return None
    if not np.isfinite(value):
        return None
    return value


def load_csv(path, schema):
    """Load a dataset, dropping rows with missing/non-numeric schema cells.

    Non-finite cells count as missing. Rows with the wrong field count raise
    MalformedCsv with the 1-based line number.
    """
    needed = list(schema.feature_names) + [schema.response_name]
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedCsv(1, "missing header row") from None
        header = [h.strip() for h in header]
        positions = {}
        for name in needed + ([schema.id_name] if schema.id_name else []):
            if name not in header:
                raise MissingColumn(name)
            positions[name] = header.index(name)

        rows, ys, ids = [], [], []
        dropped = 0
        for lineno, raw in enumerate(reader, start=2):
            if not raw:
                continue
            if len(raw) != len(header):
                raise MalformedCsv(lineno)
            cells = [_parse_cell(raw[positions[name]]) for name in needed]
            if any(c is None for c in cells):
                dropped += 1
                continue
            rows.append(cells[:-1])
            ys.append(cells[-1])
            if schema.id_name:
                ids.append(raw[positions[schema.id_name]].strip())

    if not rows:
        raise EmptyAfterFiltering(f"no usable rows in {path}")
    if not schema.id_name:
        ids = [str(i) for i in range(len(rows))]
    return Dataset(schema, np.asarray(rows), np.asarray(ys), tuple(ids), dropped)


def make_folds(n, k, seed):
    """Seeded balanced partition; fold sizes differ by at most one."""
    seed = check_seed(seed)
    if k < 2 or k > n:
        raise InvalidK(f"need 2 <= k <= n, got k={k}, n={n}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    assignments = np.empty(n, dtype=np.int64)
    assignments[perm] = np.arange(n) % k
    return FoldPlan(k=k, assignments=assignments, seed=seed)


def split_geo(ds):
    """Partition the feature matrix into (non-spatial, geo) column blocks."""
    return (
        ds.X[:, list(ds.schema.nonspatial_indices)],
        ds.X[:, list(ds.schema.geo_indices)],
    )


def reassemble(schema, nonspatial, geo):
    """Inverse of split_geo; bit-exact because columns are only permuted."""
    nonspatial = np.asarray(nonspatial, dtype=np.float64)
    geo = np.asarray(geo, dtype=np.float64)
    n = nonspatial.shape[0] if nonspatial.size else geo.shape[0]
    X = np.empty((n, schema.p), dtype=np.float64)
    X[:, list(schema.nonspatial_indices)] = nonspatial
    X[:, list(schema.geo_indices)] = geo
    return X
