"""Quick built-in oracle suite behind the `selftest` subcommand.

Closed-form checks the engine must satisfy on models whose attribution is
known analytically. Cheap enough to run anywhere; the full test suite is the
real acceptance gate.
"""

import numpy as np

from .background import BackgroundSet
from .coalitions import CoalitionSpace
from .explain import explain_exact, explain_sampled, shap_classic
from .predictor import Predictor


def _linear_case(seed):
    rng = np.random.default_rng(seed)
    p, g = 6, 2
    beta = rng.normal(size=p - g)
    scalar_cols = list(range(p - g))

    def fn(X):
        return X[:, scalar_cols] @ beta

    bg = BackgroundSet(rng.normal(size=(20, p)), "user-supplied")
    x = rng.normal(size=p)
    cs = CoalitionSpace(p, tuple(range(p - g, p)))
    return Predictor(fn, p, name="linear"), x, bg, cs, beta


def check_linear_closed_form(seed=7, tol=1e-9):
    pred, x, bg, cs, beta = _linear_case(seed)
    rec = explain_exact(pred, x, bg, cs)
    expected = beta * (x[: len(beta)] - bg.column_means()[: len(beta)])
    err = max(
        float(np.abs(rec.phi - expected).max()),
        abs(rec.phi_geo),
        float(np.abs(rec.phi_geo_x).max()),
        abs(rec.residual),
    )
    return err <= tol, f"max deviation {err:.2e} (tol {tol:g})"


def check_efficiency(seed=11, tol=1e-10):
    rng = np.random.default_rng(seed)
    p, g = 5, 2
    W = rng.normal(size=(p, 3))

    def fn(X):
        return np.tanh(X @ W).sum(axis=1) + 0.5 * X[:, 0] * X[:, p - 1]

    bg = BackgroundSet(rng.normal(size=(8, p)), "user-supplied")
    x = rng.normal(size=p)
    cs = CoalitionSpace(p, (p - 2, p - 1))
    rec = explain_exact(Predictor(fn, p), x, bg, cs)
    gap = abs((rec.phi_geo + rec.phi.sum()) - (rec.yhat - rec.phi0))
    return gap <= tol, f"player efficiency gap {gap:.2e} (tol {tol:g})"


def check_classic_reduction(seed=13, tol=1e-12):
    rng = np.random.default_rng(seed)
    p = 5
    W = rng.normal(size=(p, 2))

    def fn(X):
        return np.sin(X @ W).sum(axis=1)

    bg = BackgroundSet(rng.normal(size=(6, p)), "user-supplied")
    x = rng.normal(size=p)
    cs = CoalitionSpace(p, (p - 1,))  # g=1: last column is the location player
    rec = explain_exact(Predictor(fn, p), x, bg, cs)
    classic = shap_classic(Predictor(fn, p), x, bg)
    err = max(
        float(np.abs(rec.phi - classic.phi[: p - 1]).max()),
        abs(rec.phi_geo - classic.phi[p - 1]),
    )
    add = abs(classic.yhat - classic.phi0 - classic.phi.sum())
    ok = err <= tol and add <= 1e-10
    return ok, f"g=1 deviation {err:.2e}, classic additivity gap {add:.2e}"


def check_sampled_constraint(seed=17, tol=1e-8):
    rng = np.random.default_rng(seed)
    p, g = 6, 2
    W = rng.normal(size=(p, 2))

    def fn(X):
        return np.cos(X @ W).sum(axis=1) + X[:, 0] * X[:, p - 1]

    bg = BackgroundSet(rng.normal(size=(10, p)), "user-supplied")
    x = rng.normal(size=p)
    cs = CoalitionSpace(p, (p - 2, p - 1))
    rec = explain_sampled(Predictor(fn, p), x, bg, cs, budget=2 * cs.k + 4, seed=seed)
    return abs(rec.residual) <= tol, f"residual {rec.residual:.2e} (tol {tol:g})"


def check_dummy_player(seed=19, tol=1e-12):
    rng = np.random.default_rng(seed)
    p, g = 5, 2

    def fn(X):  # never reads column 1
        return X[:, 0] ** 2 + np.sin(X[:, 3]) + X[:, 4]

    bg = BackgroundSet(rng.normal(size=(7, p)), "user-supplied")
    x = rng.normal(size=p)
    cs = CoalitionSpace(p, (3, 4))
    rec = explain_exact(Predictor(fn, p), x, bg, cs)
    err = max(abs(rec.phi[1]), abs(rec.phi_geo_x[1]))
    return err <= tol, f"dummy attribution {err:.2e} (tol {tol:g})"


CHECKS = [
    ("linear-closed-form", check_linear_closed_form),
    ("player-efficiency", check_efficiency),
    ("classic-reduction-g1", check_classic_reduction),
    ("sampled-constraint", check_sampled_constraint),
    ("dummy-player", check_dummy_player),
]


def run_selftest(out=print):
    failures = 0
    for name, fn in CHECKS:
        ok, detail = fn()
        out(f"{'PASS' if ok else 'FAIL'}: {name} ({detail})")
        failures += 0 if ok else 1
    return failures
