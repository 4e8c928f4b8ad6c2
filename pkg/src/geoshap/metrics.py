"""Regression metrics and cross-validated scoring.

Pooled CV metrics are computed once on the concatenated out-of-fold
prediction vector, never by averaging per-fold values.
"""

from dataclasses import dataclass

import numpy as np

from ._validation import check_paired
from .errors import ZeroVariance


@dataclass(frozen=True)
class MetricReport:
    mae: float
    mse: float
    r2: float
    n: int

    def to_text(self):
        return (
            f"mae = {self.mae!r}\n"
            f"mse = {self.mse!r}\n"
            f"r2 = {self.r2!r}\n"
            f"n = {self.n}\n"
        )

    def csv_row(self, run_id, fold):
        return [run_id, fold, repr(self.mae), repr(self.mse), repr(self.r2), self.n]


CSV_HEADER = ["run_id", "fold", "mae", "mse", "r2", "n"]


def mae(y, yhat):
    y, yhat = check_paired(y, yhat)
    return float(np.mean(np.abs(y - yhat)))


def mse(y, yhat):
    y, yhat = check_paired(y, yhat)
    return float(np.mean((y - yhat) ** 2))


def r2(y, yhat):
    y, yhat = check_paired(y, yhat)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        raise ZeroVariance("observed values are constant; r2 is undefined")
    ss_res = float(np.sum((y - yhat) ** 2))
    return 1.0 - ss_res / ss_tot


def _report(y, yhat):
    y, yhat = check_paired(y, yhat)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        # single-row or constant folds have no defined r2; pooled r2 still
        # goes through r2() and fails loudly on degenerate data
        fold_r2 = float("nan")
    else:
        fold_r2 = 1.0 - float(np.sum((y - yhat) ** 2)) / ss_tot
    return MetricReport(mae=mae(y, yhat), mse=mse(y, yhat), r2=fold_r2, n=len(y))


def cv_score(ds, folds, train_fn, predict_fn):
    """Out-of-fold evaluation over a FoldPlan.

    train_fn(X, y) -> model; predict_fn(model, X) -> vector. Returns
    (per-fold reports, pooled report); pooled metrics come from the assembled
    out-of-fold prediction vector in row order.
    """
    if folds.n != ds.n:
        raise ValueError(f"fold plan covers {folds.n} rows, dataset has {ds.n}")
    oof = np.empty(ds.n, dtype=np.float64)
    fold_reports = []
    for fold in range(folds.k):
        test_idx = folds.fold_indices(fold)
        train_mask = np.ones(ds.n, dtype=bool)
        train_mask[test_idx] = False
        model = train_fn(ds.X[train_mask], ds.y[train_mask])
        yhat = np.asarray(predict_fn(model, ds.X[test_idx]), dtype=np.float64)
        oof[test_idx] = yhat
        fold_reports.append(_report(ds.y[test_idx], yhat))
    pooled = MetricReport(
        mae=mae(ds.y, oof), mse=mse(ds.y, oof), r2=r2(ds.y, oof), n=ds.n
    )
    return fold_reports, pooled
