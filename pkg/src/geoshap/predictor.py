"""Batch predictor contract: matrix of rows in, vector of predictions out."""

import numpy as np

from ._validation import check_matrix
from .errors import ArityMismatch, PredictorError


class Predictor:
    """Wraps a batch function or fitted model with arity/finiteness checks.

    ``serial=True`` declares that concurrent calls are unsafe (bridge mode);
    the engine then funnels all evaluations through one queue.
    """

    def __init__(self, fn, n_features, name="predictor", serial=False):
        self.fn = fn
        self.n_features = int(n_features)
        self.name = name
        self.serial = bool(serial)

    def __call__(self, X, context=None):
        X = check_matrix(X, name="X")
        if X.shape[1] != self.n_features and X.shape[0] > 0:
            raise ArityMismatch(
                f"{self.name} expects {self.n_features} columns, got {X.shape[1]}"
            )
        if X.shape[0] == 0:
            return np.empty(0, dtype=np.float64)
        try:
            out = self.fn(X)
        except Exception as exc:
            where = f" while evaluating {context}" if context else ""
            raise PredictorError(f"{self.name} failed{where}: {exc}") from exc
        out = np.ascontiguousarray(out, dtype=np.float64).reshape(-1)
        if out.shape[0] != X.shape[0]:
            raise PredictorError(
                f"{self.name} returned {out.shape[0]} predictions for "
                f"{X.shape[0]} rows"
            )
        if not np.isfinite(out).all():
            where = f" at {context}" if context else ""
            raise PredictorError(f"{self.name} returned non-finite values{where}")
        return out


def as_predictor(model_or_fn, n_features=None, name=None, serial=False):
    """Coerce a fitted model, bridge client, or plain callable to a Predictor."""
    if isinstance(model_or_fn, Predictor):
        return model_or_fn
    if hasattr(model_or_fn, "as_predictor"):
        return model_or_fn.as_predictor()
    if hasattr(model_or_fn, "predict"):
        arity = getattr(model_or_fn, "n_features_in_", n_features)
        if arity is None:
            raise ValueError("cannot infer feature arity from model")
        return Predictor(
            model_or_fn.predict, arity,
            name=name or type(model_or_fn).__name__, serial=serial,
        )
    if callable(model_or_fn):
        if n_features is None:
            raise ValueError("n_features is required for a bare callable")
        return Predictor(model_or_fn, n_features, name=name or "callable", serial=serial)
    raise TypeError(f"cannot build a predictor from {type(model_or_fn).__name__}")
