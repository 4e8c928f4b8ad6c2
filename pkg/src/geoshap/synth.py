"""Synthetic spatial regression data with known ground truth.

Response = sum of declared terms + homoscedastic Gaussian noise, with
optional affine rescaling to a target mean/sd and noise sizing by SNR; both
are calibrated on an internal seeded reference draw, so generated-sample
statistics land within sampling error of the target rather than being forced
exactly. Ground truth stores the exact response function, per-row local
coefficients, and the noiseless response.
"""

from dataclasses import dataclass

import numpy as np

from . import config as kvconfig
from ._validation import check_matrix, check_seed
from .data import Dataset, Schema
from .errors import InvalidSpec
from .manifest import derive_seed
from .predictor import Predictor

_CALIBRATION_N = 4096


# --- named smooth coefficient surfaces --------------------------------------

@dataclass(frozen=True)
class Plane:
    a: float = 0.0
    b: float = 0.0
    c: float = 0.0

    def evaluate(self, u, v):
        return self.a + self.b * u + self.c * v


@dataclass(frozen=True)
class GaussianBump:
    amp: float = 1.0
    u0: float = 0.5
    v0: float = 0.5
    width: float = 0.2
    base: float = 0.0

    def evaluate(self, u, v):
        r2 = (u - self.u0) ** 2 + (v - self.v0) ** 2
        return self.base + self.amp * np.exp(-r2 / (2.0 * self.width**2))


@dataclass(frozen=True)
class Sinusoid:
    amp: float = 1.0
    freq_u: float = 1.0
    freq_v: float = 1.0
    base: float = 0.0

    def evaluate(self, u, v):
        return self.base + self.amp * np.sin(self.freq_u * u) * np.sin(self.freq_v * v)


_SURFACES = {"plane": Plane, "gaussian_bump": GaussianBump, "sinusoid": Sinusoid}


def make_surface(kind, **params):
    if kind not in _SURFACES:
        raise InvalidSpec(f"unknown surface {kind!r} (choose from {sorted(_SURFACES)})")
    try:
        return _SURFACES[kind](**params)
    except TypeError as exc:
        raise InvalidSpec(f"bad parameters for surface {kind!r}: {exc}") from None


def _surface_to_dict(surface):
    kind = next(k for k, cls in _SURFACES.items() if isinstance(surface, cls))
    return {"kind": kind, **surface.__dict__}


# --- response terms ----------------------------------------------------------

@dataclass(frozen=True)
class Term:
    """One additive response component.

    kind: constant | linear | surface_linear | nonlinear | geo_only |
    geo_interaction. surface_linear and geo_interaction both contribute
    x_j * surface(u, v) and record the surface as the feature's local
    coefficient; they are kept as distinct names for spec files.
    """

    kind: str
    feature: str = None
    beta: float = None
    surface: object = None
    shape: str = None     # hinge | quadratic (nonlinear terms)
    knee: float = 0.0
    slope: float = 1.0
    center: float = 0.0
    scale: float = 1.0
    value: float = 0.0    # constant terms

    def evaluate(self, columns, u, v):
        if self.kind == "constant":
            return np.full_like(u, self.value)
        if self.kind == "geo_only":
            return self.surface.evaluate(u, v)
        x = columns[self.feature]
        if self.kind == "linear":
            return self.beta * x
        if self.kind in ("surface_linear", "geo_interaction"):
            return x * self.surface.evaluate(u, v)
        if self.kind == "nonlinear":
            if self.shape == "hinge":
                return self.slope * np.maximum(0.0, x - self.knee)
            return self.scale * (x - self.center) ** 2
        raise InvalidSpec(f"unknown term kind {self.kind!r}")

    def coefficient(self, u, v):
        """Local linear coefficient this term contributes to its feature."""
        if self.kind == "linear":
            return np.full_like(u, self.beta)
        if self.kind in ("surface_linear", "geo_interaction"):
            return self.surface.evaluate(u, v)
        return None

    def describe(self):
        if self.kind == "constant":
            return f"constant {self.value}"
        if self.kind == "geo_only":
            return f"geo_only {_surface_to_dict(self.surface)}"
        return f"{self.kind} on {self.feature}"

    def to_dict(self):
        d = {"kind": self.kind}
        if self.feature is not None:
            d["feature"] = self.feature
        if self.kind == "constant":
            d["value"] = self.value
        elif self.kind == "linear":
            d["beta"] = self.beta
        elif self.kind in ("surface_linear", "geo_interaction", "geo_only"):
            d["surface"] = _surface_to_dict(self.surface)
        elif self.kind == "nonlinear":
            d["shape"] = self.shape
            if self.shape == "hinge":
                d.update(knee=self.knee, slope=self.slope)
            else:
                d.update(center=self.center, scale=self.scale)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "surface" in d:
            s = dict(d["surface"])
            d["surface"] = make_surface(s.pop("kind"), **s)
        return cls(**d)


def constant(value):
    return Term(kind="constant", value=float(value))


def linear(feature, beta):
    return Term(kind="linear", feature=feature, beta=float(beta))


def surface_linear(feature, surface):
    return Term(kind="surface_linear", feature=feature, surface=surface)


def geo_interaction(feature, surface):
    return Term(kind="geo_interaction", feature=feature, surface=surface)


def geo_only(surface):
    return Term(kind="geo_only", surface=surface)


def hinge(feature, knee, slope=1.0):
    return Term(kind="nonlinear", feature=feature, shape="hinge",
                knee=float(knee), slope=float(slope))


def quadratic(feature, center=0.0, scale=1.0):
    return Term(kind="nonlinear", feature=feature, shape="quadratic",
                center=float(center), scale=float(scale))


# --- feature distributions ---------------------------------------------------

@dataclass(frozen=True)
class FeatureSpec:
    name: str
    dist: str = "normal"   # normal | uniform
    mean: float = 0.0
    sd: float = 1.0
    low: float = 0.0
    high: float = 1.0

    def draw(self, rng, n):
        if self.dist == "normal":
            return rng.normal(self.mean, self.sd, size=n)
        if self.dist == "uniform":
            return rng.uniform(self.low, self.high, size=n)
        raise InvalidSpec(f"unknown distribution {self.dist!r} for {self.name}")

    def to_dict(self):
        if self.dist == "normal":
            return {"name": self.name, "dist": "normal", "mean": self.mean, "sd": self.sd}
        return {"name": self.name, "dist": "uniform", "low": self.low, "high": self.high}


# --- the spec ----------------------------------------------------------------

@dataclass(frozen=True)
class SynthSpec:
    n: int
    features: tuple
    terms: tuple
    domain: tuple = (0.0, 1.0, 0.0, 1.0)  # u_min, u_max, v_min, v_max
    noise_sd: float = None
    noise_snr: float = None
    response_target: tuple = None  # (mean, sd)
    seed: int = 0
    geo_names: tuple = ("u", "v")
    response_name: str = "y"

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        object.__setattr__(self, "terms", tuple(self.terms))
        if self.n < 1:
            raise InvalidSpec(f"n must be >= 1, got {self.n}")
        if len(self.domain) != 4 or not (
            self.domain[0] < self.domain[1] and self.domain[2] < self.domain[3]
        ):
            raise InvalidSpec(f"bad domain box {self.domain}")
        if self.noise_sd is not None and self.noise_sd < 0:
            raise InvalidSpec(f"noise_sd must be >= 0, got {self.noise_sd}")
        if self.noise_sd is not None and self.noise_snr is not None:
            raise InvalidSpec("give noise_sd or noise_snr, not both")
        if len(self.geo_names) != 2:
            raise InvalidSpec("synthetic domain is 2-d: exactly two geo names")
        declared = {f.name for f in self.features}
        if len(declared) != len(self.features):
            raise InvalidSpec("feature names repeat")
        for term in self.terms:
            if term.feature is not None and term.feature not in declared:
                raise InvalidSpec(
                    f"term ({term.describe()}) references undeclared feature "
                    f"{term.feature!r}"
                )
        if not self.terms:
            raise InvalidSpec("at least one response term is required")
        check_seed(self.seed)

    @property
    def schema(self):
        names = tuple(f.name for f in self.features) + tuple(self.geo_names)
        return Schema(names, self.response_name, tuple(self.geo_names))

    def to_dict(self):
        return {
            "n": self.n,
            "domain": list(self.domain),
            "features": [f.to_dict() for f in self.features],
            "terms": [t.to_dict() for t in self.terms],
            "noise_sd": self.noise_sd,
            "noise_snr": self.noise_snr,
            "response_target": None if self.response_target is None
            else list(self.response_target),
            "seed": self.seed,
            "geo_names": list(self.geo_names),
            "response_name": self.response_name,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            n=d["n"],
            features=tuple(FeatureSpec(**f) for f in d["features"]),
            terms=tuple(Term.from_dict(t) for t in d["terms"]),
            domain=tuple(d.get("domain", (0, 1, 0, 1))),
            noise_sd=d.get("noise_sd"),
            noise_snr=d.get("noise_snr"),
            response_target=None if d.get("response_target") is None
            else tuple(d["response_target"]),
            seed=d.get("seed", 0),
            geo_names=tuple(d.get("geo_names", ("u", "v"))),
            response_name=d.get("response_name", "y"),
        )


@dataclass(frozen=True)
class GroundTruth:
    """Exact response function plus per-row truths for the generated rows."""

    spec: SynthSpec
    noiseless: np.ndarray          # affine-scaled signal at the generated rows
    coefficients: dict             # feature name -> per-row local coefficient
    affine: tuple = (0.0, 1.0)     # response = a + b * (signal + noise)
    noise_sd_effective: float = 0.0

    def evaluate(self, X):
        """Noiseless response for arbitrary rows in schema column order."""
        X = check_matrix(X, n_cols=self.spec.schema.p, name="X")
        schema = self.spec.schema
        columns = {
            f.name: X[:, schema.feature_names.index(f.name)]
            for f in self.spec.features
        }
        u = X[:, schema.feature_names.index(self.spec.geo_names[0])]
        v = X[:, schema.feature_names.index(self.spec.geo_names[1])]
        a, b = self.affine
        signal = np.zeros(X.shape[0])
        for term in self.spec.terms:
            signal = signal + term.evaluate(columns, u, v)
        return a + b * signal

    def save(self, path):
        import json

        payload = {
            "format": "geoshap-truth",
            "version": 1,
            "spec": self.spec.to_dict(),
            "affine": list(self.affine),
            "noise_sd_effective": self.noise_sd_effective,
            "noiseless": [float(x) for x in self.noiseless],
            "coefficients": {
                name: [float(x) for x in arr]
                for name, arr in self.coefficients.items()
            },
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, allow_nan=False)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        import json

        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        if payload.get("format") != "geoshap-truth":
            raise InvalidSpec(f"{path} is not a ground-truth file")
        return cls(
            spec=SynthSpec.from_dict(payload["spec"]),
            noiseless=np.asarray(payload["noiseless"]),
            coefficients={
                name: np.asarray(arr)
                for name, arr in payload["coefficients"].items()
            },
            affine=tuple(payload["affine"]),
            noise_sd_effective=payload["noise_sd_effective"],
        )

    def coefficient_at(self, feature, u, v):
        """True local coefficient of a feature at arbitrary coordinates."""
        u = np.asarray(u, dtype=np.float64)
        v = np.asarray(v, dtype=np.float64)
        a, b = self.affine
        total = np.zeros_like(u)
        found = False
        for term in self.spec.terms:
            if term.feature == feature:
                coef = term.coefficient(u, v)
                if coef is not None:
                    total = total + coef
                    found = True
        if not found:
            raise InvalidSpec(f"no coefficient-bearing term on {feature!r}")
        return b * total


def _signal(spec, columns, u, v):
    total = np.zeros_like(u)
    for term in spec.terms:
        total = total + term.evaluate(columns, u, v)
    return total


def _draw(spec, rng, n):
    u = rng.uniform(spec.domain[0], spec.domain[1], size=n)
    v = rng.uniform(spec.domain[2], spec.domain[3], size=n)
    columns = {f.name: f.draw(rng, n) for f in spec.features}
    return columns, u, v


def generate(spec):
    """Sample a Dataset per the spec; returns (Dataset, GroundTruth)."""
    if not isinstance(spec, SynthSpec):
        raise InvalidSpec(f"expected SynthSpec, got {type(spec).__name__}")

    # calibration draw fixes noise scale and the affine target transform at
    # the population level (independent of the generated sample)
    cal_rng = np.random.default_rng(derive_seed(spec.seed, "calibrate"))
    cal_cols, cal_u, cal_v = _draw(spec, cal_rng, _CALIBRATION_N)
    cal_signal = _signal(spec, cal_cols, cal_u, cal_v)

    if spec.noise_snr is not None:
        signal_sd = float(cal_signal.std())
        if signal_sd == 0.0:
            raise InvalidSpec("noise_snr needs a non-constant signal")
        noise_sd = signal_sd / float(np.sqrt(spec.noise_snr))
    else:
        noise_sd = float(spec.noise_sd or 0.0)

    a, b = 0.0, 1.0
    if spec.response_target is not None:
        target_mean, target_sd = spec.response_target
        raw_sd = float(np.sqrt(cal_signal.var() + noise_sd**2))
        if raw_sd == 0.0:
            raise InvalidSpec("response_target needs a non-degenerate response")
        b = target_sd / raw_sd
        a = target_mean - b * float(cal_signal.mean())

    rng = np.random.default_rng(spec.seed)
    columns, u, v = _draw(spec, rng, spec.n)
    signal = _signal(spec, columns, u, v)
    noise = rng.normal(0.0, noise_sd, size=spec.n) if noise_sd > 0 else np.zeros(spec.n)
    y = a + b * (signal + noise)

    schema = spec.schema
    X = np.column_stack([columns[f.name] for f in spec.features] + [u, v])

    coefficients = {}
    for term in spec.terms:
        coef = term.coefficient(u, v)
        if coef is not None:
            prev = coefficients.get(term.feature, np.zeros(spec.n))
            coefficients[term.feature] = prev + b * coef

    truth = GroundTruth(
        spec=spec,
        noiseless=a + b * signal,
        coefficients=coefficients,
        affine=(a, b),
        noise_sd_effective=b * noise_sd,
    )
    ds = Dataset(schema, X, y, tuple(str(i) for i in range(spec.n)))
    return ds, truth


def truth_predictor(truth):
    """The exact noiseless response as a batch Predictor."""
    return Predictor(truth.evaluate, truth.spec.schema.p, name="ground-truth")


# --- spec files ---------------------------------------------------------------

def _parse_params(tokens, context):
    params = {}
    for tok in tokens:
        if "=" not in tok:
            raise InvalidSpec(f"{context}: expected key=value, got {tok!r}")
        key, val = tok.split("=", 1)
        try:
            params[key.strip()] = float(val)
        except ValueError:
            raise InvalidSpec(f"{context}: non-numeric value in {tok!r}") from None
    return params


def _parse_feature(value):
    tokens = value.split()
    if len(tokens) < 2:
        raise InvalidSpec(f"feature line needs 'name dist ...', got {value!r}")
    name, dist = tokens[0], tokens[1]
    params = _parse_params(tokens[2:], f"feature {name}")
    try:
        return FeatureSpec(name=name, dist=dist, **params)
    except TypeError as exc:
        raise InvalidSpec(f"feature {name}: {exc}") from None


def _parse_term(value):
    tokens = value.split()
    if not tokens:
        raise InvalidSpec("empty term line")
    kind = tokens[0]
    ctx = f"term {value!r}"
    try:
        if kind == "constant":
            return constant(float(tokens[1]))
        if kind == "linear":
            params = _parse_params(tokens[2:], ctx)
            return linear(tokens[1], params.get("beta", 1.0))
        if kind == "geo_only":
            surface = make_surface(tokens[1], **_parse_params(tokens[2:], ctx))
            return geo_only(surface)
        if kind in ("surface_linear", "geo_interaction"):
            surface = make_surface(tokens[2], **_parse_params(tokens[3:], ctx))
            term = surface_linear(tokens[1], surface)
            return term if kind == "surface_linear" else geo_interaction(tokens[1], surface)
        if kind == "nonlinear":
            shape = tokens[2]
            params = _parse_params(tokens[3:], ctx)
            if shape == "hinge":
                return hinge(tokens[1], params.get("knee", 0.0), params.get("slope", 1.0))
            if shape == "quadratic":
                return quadratic(tokens[1], params.get("center", 0.0),
                                 params.get("scale", 1.0))
            raise InvalidSpec(f"{ctx}: unknown nonlinear shape {shape!r}")
    except IndexError:
        raise InvalidSpec(f"{ctx}: missing arguments") from None
    raise InvalidSpec(f"{ctx}: unknown term kind {kind!r}")


def parse_spec_text(text):
    cfg = kvconfig.parse_kv(text)
    n = int(kvconfig.single(cfg, "n", required=True))
    seed = int(kvconfig.single(cfg, "seed", default="0"))
    domain = tuple(
        float(x) for x in kvconfig.name_list(
            kvconfig.single(cfg, "domain", default="0, 1, 0, 1"))
    )
    geo = kvconfig.name_list(kvconfig.single(cfg, "geo", default="u, v"))
    response = kvconfig.single(cfg, "response", default="y")
    noise_sd = kvconfig.single(cfg, "noise_sd")
    noise_snr = kvconfig.single(cfg, "noise_snr")
    target = kvconfig.single(cfg, "response_target")
    features = tuple(_parse_feature(v) for v in cfg.get("feature", []))
    terms = tuple(_parse_term(v) for v in cfg.get("term", []))
    return SynthSpec(
        n=n,
        features=features,
        terms=terms,
        domain=domain,
        noise_sd=None if noise_sd is None else float(noise_sd),
        noise_snr=None if noise_snr is None else float(noise_snr),
        response_target=None if target is None else tuple(
            float(x) for x in kvconfig.name_list(target)),
        seed=seed,
        geo_names=geo,
        response_name=response,
    )


def load_spec(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_spec_text(fh.read())
