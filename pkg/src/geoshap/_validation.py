"""Input validation helpers used across the estimator and engine surfaces."""

import numpy as np

from .errors import ArityMismatch, EmptyInput, LengthMismatch


def check_matrix(X, *, n_cols=None, name="X", allow_empty=True):
    """Coerce to a C-contiguous 2-d float64 array; check column count."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1) if X.size else X.reshape(0, 0)
    if X.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got ndim={X.ndim}")
    if not allow_empty and X.shape[0] == 0:
        raise EmptyInput(f"{name} has no rows")
    if n_cols is not None and X.shape[1] != n_cols:
        raise ArityMismatch(
            f"{name} has {X.shape[1]} columns, expected {n_cols}"
        )
    return X


def check_vector(v, *, length=None, name="y"):
    v = np.ascontiguousarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"{name} must be 1-dimensional, got ndim={v.ndim}")
    if length is not None and v.shape[0] != length:
        raise LengthMismatch(
            f"{name} has length {v.shape[0]}, expected {length}"
        )
    return v


def check_paired(y, yhat):
    """Validate two equal-length nonempty vectors (metric inputs)."""
    y = check_vector(y, name="y")
    yhat = check_vector(yhat, name="yhat")
    if y.shape[0] != yhat.shape[0]:
        raise LengthMismatch(
            f"y has length {y.shape[0]} but yhat has length {yhat.shape[0]}"
        )
    if y.shape[0] == 0:
        raise EmptyInput("metric inputs are empty")
    return y, yhat


def check_seed(seed):
    if not isinstance(seed, (int, np.integer)):
        raise ValueError(f"seed must be an integer, got {type(seed).__name__}")
    return int(seed)
