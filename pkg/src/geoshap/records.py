"""Per-instance explanation records and their CSV + JSON-sidecar round trip."""

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .data import Schema
from .errors import GeoShapError


@dataclass(frozen=True)
class ExplanationRecord:
    """Decomposition of one prediction: baseline, location, feature, synergy.

    ``residual = yhat - (phi0 + phi_geo + sum(phi) + sum(phi_geo_x))`` is
    reported, never silently absorbed.
    """

    id: str
    location: tuple
    phi0: float
    phi_geo: float
    phi: np.ndarray
    phi_geo_x: np.ndarray
    yhat: float
    residual: float
    estimator: str
    budget: int

    def components(self):
        """All components in sidecar order: phi0, phi_geo, phi..., phi_geo_x...."""
        return np.concatenate(
            [[self.phi0, self.phi_geo], self.phi, self.phi_geo_x]
        )


@dataclass(frozen=True)
class ClassicExplanation:
    """Flat per-column attribution (every coordinate its own player)."""

    id: str
    phi0: float
    phi: np.ndarray
    yhat: float
    residual: float


def component_names(schema):
    scalar = [n for n in schema.feature_names if n not in schema.geo_names]
    return (
        ["phi0", "phi_geo"]
        + [f"phi:{n}" for n in scalar]
        + [f"phi_geo_x:{n}" for n in scalar]
    )


@dataclass(frozen=True)
class ExplanationSet:
    """Explanation records plus the rows they explain and run metadata."""

    schema: Schema
    X: np.ndarray
    records: tuple
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        X = np.ascontiguousarray(self.X, dtype=np.float64)
        X.flags.writeable = False
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "records", tuple(self.records))
        if X.shape[0] != len(self.records):
            raise ValueError("X rows and record count differ")

    @property
    def n(self):
        return len(self.records)

    @property
    def scalar_names(self):
        return tuple(
            n for n in self.schema.feature_names if n not in self.schema.geo_names
        )

    def header(self):
        return (
            ["id"]
            + list(self.schema.geo_names)
            + ["yhat", "phi0", "phi_geo"]
            + [f"phi_{n}" for n in self.scalar_names]
            + [f"phi_geo_x_{n}" for n in self.scalar_names]
            + ["residual", "estimator", "budget"]
        )

    def save(self, path):
        """Write the record CSV and the JSON sidecar at <path>.meta.json."""
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.header())
            for rec in self.records:
                row = (
                    [rec.id]
                    + [repr(float(v)) for v in rec.location]
                    + [repr(rec.yhat), repr(rec.phi0), repr(rec.phi_geo)]
                    + [repr(float(v)) for v in rec.phi]
                    + [repr(float(v)) for v in rec.phi_geo_x]
                    + [repr(rec.residual), rec.estimator, rec.budget]
                )
                writer.writerow(row)
        sidecar = {
            "schema": {
                "features": list(self.schema.feature_names),
                "response": self.schema.response_name,
                "geo": list(self.schema.geo_names),
            },
            **self.metadata,
        }
        with open(sidecar_path(path), "w", encoding="utf-8") as fh:
            json.dump(sidecar, fh, indent=2, allow_nan=False)
            fh.write("\n")

    @classmethod
    def read(cls, path):
        """Load records from CSV + sidecar. X holds only the geo columns the
        CSV carries; non-geo columns are NaN placeholders (rejoin the source
        dataset by id for value-dependent analytics)."""
        with open(sidecar_path(path), "r", encoding="utf-8") as fh:
            sidecar = json.load(fh)
        schema = Schema(
            tuple(sidecar["schema"]["features"]),
            sidecar["schema"]["response"],
            tuple(sidecar["schema"]["geo"]),
        )
        scalar = [n for n in schema.feature_names if n not in schema.geo_names]
        records = []
        rows = []
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            col = {name: i for i, name in enumerate(header)}
            for raw in reader:
                loc = tuple(float(raw[col[g]]) for g in schema.geo_names)
                phi = np.array([float(raw[col[f"phi_{n}"]]) for n in scalar])
                pgx = np.array([float(raw[col[f"phi_geo_x_{n}"]]) for n in scalar])
                records.append(ExplanationRecord(
                    id=raw[col["id"]],
                    location=loc,
                    phi0=float(raw[col["phi0"]]),
                    phi_geo=float(raw[col["phi_geo"]]),
                    phi=phi,
                    phi_geo_x=pgx,
                    yhat=float(raw[col["yhat"]]),
                    residual=float(raw[col["residual"]]),
                    estimator=raw[col["estimator"]],
                    budget=int(raw[col["budget"]]),
                ))
                row = np.full(schema.p, np.nan)
                for g, v in zip(schema.geo_indices, loc):
                    row[g] = v
                rows.append(row)
        if not records:
            raise GeoShapError(f"no records in {path}")
        return cls(schema, np.asarray(rows), tuple(records), sidecar)

    def with_instances(self, ds):
        """Attach full instance rows from the source dataset, matched by id."""
        by_id = {rid: i for i, rid in enumerate(ds.ids)}
        try:
            rows = [by_id[rec.id] for rec in self.records]
        except KeyError as exc:
            raise GeoShapError(f"record id {exc} not present in dataset") from None
        return ExplanationSet(self.schema, ds.X[rows], self.records, dict(self.metadata))


def sidecar_path(path):
    return f"{path}.meta.json"
