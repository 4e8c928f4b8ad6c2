import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from geoshap import BackgroundSet, CoalitionSpace, Dataset, Predictor, Schema


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


@pytest.fixture
def small_schema():
    return Schema(("x1", "x2", "lat", "lon"), "y", ("lat", "lon"))


@pytest.fixture
def small_dataset(small_schema, rng):
    X = rng.normal(size=(40, 4))
    y = 2.0 * X[:, 0] - 1.0 * X[:, 1] + 0.5 * X[:, 2] + rng.normal(scale=0.1, size=40)
    return Dataset(small_schema, X, y, tuple(str(i) for i in range(40)))


def linear_predictor(beta, p):
    beta = np.asarray(beta, dtype=float)

    def fn(X):
        return X[:, : beta.shape[0]] @ beta

    return Predictor(fn, p, name="linear")


@pytest.fixture
def interaction_case():
    """The worked two-player game: f = x1 * lat, single zero background row."""
    cs = CoalitionSpace(3, (1, 2))
    pred = Predictor(lambda X: X[:, 0] * X[:, 1], 3)
    bg = BackgroundSet(np.zeros((1, 3)))
    x = np.array([2.0, 3.0, 0.0])
    return pred, x, bg, cs
