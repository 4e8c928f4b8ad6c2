import json

import numpy as np
import pytest

from geoshap import GbdtParams, GradientBoostedRegressor
from geoshap.errors import (
    ArityMismatch,
    CorruptModelFile,
    DegenerateFeatureWarning,
    TooFewRows,
)


def step_data(n=40):
    """y is a step in x1: the depth-1 optimum is the two leaf means."""
    x = np.linspace(0, 1, n)
    y = np.where(x < 0.5, -1.0, 2.0)
    X = np.column_stack([x, np.zeros(n)])
    return X, y


class TestParams:
    def test_validation(self):
        with pytest.raises(ValueError):
            GbdtParams(n_trees=0)
        with pytest.raises(ValueError):
            GbdtParams(max_depth=0)
        with pytest.raises(ValueError):
            GbdtParams(learning_rate=0.0)
        with pytest.raises(ValueError):
            GbdtParams(subsample=1.5)

    def test_sklearn_get_params(self):
        model = GradientBoostedRegressor(n_trees=7, max_depth=2)
        params = model.get_params()
        assert params["n_trees"] == 7 and params["max_depth"] == 2
        clone = GradientBoostedRegressor(**params)
        assert clone.get_params() == params


class TestFit:
    def test_two_leaf_optimum_on_step(self):
        X, y = step_data()
        model = GradientBoostedRegressor(n_trees=1, max_depth=1, learning_rate=1.0,
                                         seed=0)
        with pytest.warns(DegenerateFeatureWarning):
            model.fit(X, y)
        np.testing.assert_allclose(model.predict(X), y, atol=1e-12)

    def test_constant_response(self, rng):
        X = rng.normal(size=(30, 3))
        y = np.full(30, 4.25)
        model = GradientBoostedRegressor(n_trees=20, max_depth=3, seed=1).fit(X, y)
        np.testing.assert_allclose(model.predict(rng.normal(size=(10, 3))), 4.25)

    def test_deterministic_serialization(self, rng):
        X = rng.normal(size=(60, 4))
        y = rng.normal(size=60)
        a = GradientBoostedRegressor(n_trees=15, max_depth=3, subsample=0.8, seed=5).fit(X, y)
        b = GradientBoostedRegressor(n_trees=15, max_depth=3, subsample=0.8, seed=5).fit(X, y)
        assert json.dumps(a.to_dict()) == json.dumps(b.to_dict())

    def test_too_few_rows(self):
        X = np.zeros((3, 2))
        with pytest.raises(TooFewRows):
            GradientBoostedRegressor(min_samples_leaf=2).fit(X, np.zeros(3))

    def test_training_loss_monotone_full_sample(self, rng):
        X = rng.normal(size=(80, 3))
        y = np.sin(X[:, 0]) + 0.5 * X[:, 1] + rng.normal(scale=0.2, size=80)
        model = GradientBoostedRegressor(n_trees=40, max_depth=2, learning_rate=0.2,
                                         subsample=1.0, seed=0).fit(X, y)
        losses = np.array(model.train_losses_)
        assert (np.diff(losses) <= 1e-12).all()

    def test_training_loss_trend_with_subsample(self, rng):
        X = rng.normal(size=(120, 3))
        y = np.sin(X[:, 0]) + 0.5 * X[:, 1] + rng.normal(scale=0.2, size=120)
        model = GradientBoostedRegressor(n_trees=40, max_depth=2, learning_rate=0.2,
                                         subsample=0.6, seed=0).fit(X, y)
        losses = np.array(model.train_losses_)
        # 5-round windows trend downward even if single rounds wiggle
        window = np.convolve(losses, np.ones(5) / 5, mode="valid")
        assert window[-1] < window[0]

    def test_split_tie_break_prefers_lowest_feature(self):
        X, y = step_data()
        X2 = np.column_stack([X[:, 0], X[:, 0]])  # duplicated feature
        model = GradientBoostedRegressor(n_trees=1, max_depth=1, learning_rate=1.0,
                                         seed=0).fit(X2, y)
        assert model.trees_[0].feature[0] == 0

    def test_threshold_is_midpoint_of_adjacent_values(self):
        X = np.array([[0.0, 0], [1.0, 0], [4.0, 0], [5.0, 0]])
        y = np.array([0.0, 0.0, 10.0, 10.0])
        model = GradientBoostedRegressor(n_trees=1, max_depth=1, learning_rate=1.0,
                                         seed=0)
        with pytest.warns(DegenerateFeatureWarning):
            model.fit(X, y)
        assert model.trees_[0].threshold[0] == 2.5


class TestPredict:
    def test_empty_matrix(self, rng):
        X = rng.normal(size=(20, 3))
        model = GradientBoostedRegressor(n_trees=3, seed=0).fit(X, rng.normal(size=20))
        out = model.predict(np.empty((0, 3)))
        assert out.shape == (0,)

    def test_hand_traced_single_tree(self):
        X, y = step_data()
        model = GradientBoostedRegressor(n_trees=1, max_depth=1, learning_rate=0.7,
                                         seed=0)
        with pytest.warns(DegenerateFeatureWarning):
            model.fit(X, y)
        tree = model.trees_[0]
        base = y.mean()
        row = np.array([[0.1, 0.0]])
        leaf = tree.value[tree.left[0]] if 0.1 <= tree.threshold[0] else tree.value[tree.right[0]]
        assert model.predict(row)[0] == pytest.approx(base + 0.7 * leaf, abs=1e-12)

    def test_batch_consistency(self, rng):
        X = rng.normal(size=(25, 3))
        model = GradientBoostedRegressor(n_trees=10, seed=2).fit(X, rng.normal(size=25))
        Xq = rng.normal(size=(7, 3))
        doubled = model.predict(np.vstack([Xq, Xq]))
        np.testing.assert_array_equal(doubled[:7], doubled[7:])
        np.testing.assert_array_equal(doubled[:7], model.predict(Xq))

    def test_row_order_invariance(self, rng):
        X = rng.normal(size=(30, 3))
        model = GradientBoostedRegressor(n_trees=10, seed=2).fit(X, rng.normal(size=30))
        Xq = rng.normal(size=(12, 3))
        perm = rng.permutation(12)
        np.testing.assert_array_equal(model.predict(Xq)[perm], model.predict(Xq[perm]))

    def test_arity_mismatch(self, rng):
        X = rng.normal(size=(20, 3))
        model = GradientBoostedRegressor(n_trees=2, seed=0).fit(X, rng.normal(size=20))
        with pytest.raises(ArityMismatch):
            model.predict(rng.normal(size=(4, 5)))


class TestPersistence:
    def fitted(self, rng, n_trees=10):
        X = rng.normal(size=(50, 4))
        y = np.sin(X[:, 0]) + X[:, 1] * X[:, 2]
        return GradientBoostedRegressor(n_trees=n_trees, max_depth=3, seed=7).fit(X, y), X

    def test_roundtrip_bit_identical(self, rng, tmp_path):
        model, _ = self.fitted(rng)
        path = tmp_path / "model.json"
        model.save(path)
        loaded = GradientBoostedRegressor.load(path)
        Xq = rng.normal(size=(100, 4))
        np.testing.assert_array_equal(model.predict(Xq), loaded.predict(Xq))

    def test_truncated_file(self, rng, tmp_path):
        model, _ = self.fitted(rng)
        path = tmp_path / "model.json"
        model.save(path)
        path.write_text(path.read_text()[:100])
        with pytest.raises(CorruptModelFile):
            GradientBoostedRegressor.load(path)

    def test_version_mismatch(self, rng, tmp_path):
        model, _ = self.fitted(rng)
        d = model.to_dict()
        d["version"] = 99
        path = tmp_path / "model.json"
        path.write_text(json.dumps(d))
        with pytest.raises(CorruptModelFile, match="version"):
            GradientBoostedRegressor.load(path)

    def test_wrong_format(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text(json.dumps({"format": "something-else", "version": 1}))
        with pytest.raises(CorruptModelFile):
            GradientBoostedRegressor.load(path)
