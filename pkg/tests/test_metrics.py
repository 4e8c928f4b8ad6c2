import numpy as np
import pytest

from geoshap import Dataset, GradientBoostedRegressor, Schema, cv_score, mae, make_folds, mse, r2
from geoshap.errors import EmptyInput, LengthMismatch, ZeroVariance


class TestMae:
    def test_identity(self):
        assert mae([1, 2, 3], [1, 2, 3]) == 0.0

    def test_hand_value(self):
        assert mae([0, 0], [1, 3]) == 2.0

    def test_single(self):
        assert mae([5], [2]) == 3.0

    def test_errors(self):
        with pytest.raises(LengthMismatch):
            mae([1, 2], [1])
        with pytest.raises(EmptyInput):
            mae([], [])

    def test_permutation_invariant(self, rng):
        y = rng.normal(size=31)
        yhat = rng.normal(size=31)
        perm = rng.permutation(31)
        assert mae(y, yhat) == pytest.approx(mae(y[perm], yhat[perm]), abs=1e-14)


class TestMse:
    def test_identity(self):
        assert mse([1, 2], [1, 2]) == 0.0

    def test_hand_value(self):
        assert mse([0, 0], [1, 3]) == 5.0

    def test_residual_scaling(self, rng):
        y = rng.normal(size=20)
        r = rng.normal(size=20)
        base = mse(y, y + r)
        scaled = mse(y, y + 3.0 * r)
        assert scaled == pytest.approx(9.0 * base, rel=1e-12)


class TestR2:
    def test_perfect(self, rng):
        y = rng.normal(size=11)
        assert r2(y, y) == 1.0

    def test_mean_predictor(self, rng):
        y = rng.normal(size=11)
        assert r2(y, np.full(11, y.mean())) == pytest.approx(0.0, abs=1e-12)

    def test_zero_variance(self):
        with pytest.raises(ZeroVariance):
            r2([2, 2, 2], [1, 2, 3])

    def test_shift_invariant(self, rng):
        y = rng.normal(size=25)
        yhat = rng.normal(size=25)
        assert r2(y, yhat) == pytest.approx(r2(y + 7.0, yhat + 7.0), abs=1e-10)


def _identity_learnable(n=300, seed=3):
    rng = np.random.default_rng(seed)
    schema = Schema(("x1", "lat", "lon"), "y", ("lat", "lon"))
    y = rng.normal(size=n)
    X = np.column_stack([y, rng.normal(size=n), rng.normal(size=n)])
    return Dataset(schema, X, y, tuple(map(str, range(n))))


class TestCvScore:
    def train(self, X, y):
        return GradientBoostedRegressor(n_trees=150, max_depth=2, learning_rate=0.3,
                                        seed=0).fit(X, y)

    def predict(self, model, X):
        return model.predict(X)

    def test_identity_learnable(self):
        ds = _identity_learnable()
        folds = make_folds(ds.n, 10, seed=0)
        fold_reports, pooled = cv_score(ds, folds, self.train, self.predict)
        assert pooled.r2 >= 0.99
        assert len(fold_reports) == 10

    def test_leave_one_out_structure(self):
        ds = _identity_learnable(n=5)
        folds = make_folds(5, 5, seed=0)
        fold_reports, pooled = cv_score(ds, folds, self.train, self.predict)
        assert len(fold_reports) == 5
        assert all(rep.n == 1 for rep in fold_reports)
        assert all(np.isnan(rep.r2) for rep in fold_reports)
        assert np.isfinite(pooled.r2)

    def test_deterministic(self):
        ds = _identity_learnable()
        folds = make_folds(ds.n, 5, seed=9)
        a = cv_score(ds, folds, self.train, self.predict)
        b = cv_score(ds, folds, self.train, self.predict)
        assert a[1] == b[1]
        assert a[0] == b[0]

    def test_pooled_is_concatenated_not_averaged(self):
        # two folds with very different sizes and error scales make the
        # mean-of-folds disagree with the pooled value
        schema = Schema(("x1", "lat"), "y", ("lat",))
        n = 31  # unequal fold sizes, so fold-mean and pooled MAE differ
        rng = np.random.default_rng(0)
        X = rng.normal(size=(n, 2))
        y = rng.normal(size=n)
        ds = Dataset(schema, X, y, tuple(map(str, range(n))))
        folds = make_folds(n, 3, seed=1)

        def train(X_, y_):
            return float(y_.mean())

        def predict(model, X_):
            return np.full(X_.shape[0], model)

        fold_reports, pooled = cv_score(ds, folds, train, predict)
        oof = np.empty(n)
        for fold in range(folds.k):
            idx = folds.fold_indices(fold)
            mask = np.ones(n, dtype=bool)
            mask[idx] = False
            oof[idx] = y[mask].mean()
        assert pooled.mae == pytest.approx(mae(y, oof), abs=1e-12)
        assert pooled.mae != pytest.approx(
            np.mean([rep.mae for rep in fold_reports]), abs=1e-9
        )

    def test_report_serialization(self):
        ds = _identity_learnable(n=40)
        folds = make_folds(ds.n, 4, seed=0)
        _, pooled = cv_score(ds, folds, self.train, self.predict)
        text = pooled.to_text()
        assert "mae =" in text and "r2 =" in text
        row = pooled.csv_row("run123", "pooled")
        assert row[0] == "run123" and row[-1] == ds.n
