"""Reference rows used to marginalize absent coalition members."""

from dataclasses import dataclass

import numpy as np
from sklearn.cluster import KMeans

from ._validation import check_matrix, check_seed

PROVENANCES = ("subsample", "centroids", "user-supplied", "bootstrap")


@dataclass(frozen=True)
class BackgroundSet:
    X: np.ndarray
    provenance: str = "user-supplied"
    seed: int = None

    def __post_init__(self):
        X = check_matrix(self.X, name="background")
        if X.shape[0] < 1:
            raise ValueError("background set needs at least one row")
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        X = X.copy()
        X.flags.writeable = False
        object.__setattr__(self, "X", X)

    @property
    def m(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    def column_means(self):
        return self.X.mean(axis=0)

    @classmethod
    def subsample(cls, X, m=100, seed=0):
        """Seeded uniform row subsample (without replacement when possible)."""
        X = check_matrix(X, name="data")
        seed = check_seed(seed)
        if X.shape[0] <= m:
            return cls(X, "subsample", seed)
        rng = np.random.default_rng(seed)
        rows = np.sort(rng.choice(X.shape[0], size=m, replace=False))
        return cls(X[rows], "subsample", seed)

    @classmethod
    def centroids(cls, X, m=10, seed=0):
        """K-means centroids as a compact background summary."""
        X = check_matrix(X, name="data")
        seed = check_seed(seed)
        m = min(m, X.shape[0])
        km = KMeans(n_clusters=m, n_init=1, random_state=seed).fit(X)
        return cls(km.cluster_centers_, "centroids", seed)

    def resample(self, seed):
        """Bootstrap resample (with replacement) of the background rows."""
        seed = check_seed(seed)
        rng = np.random.default_rng(seed)
        rows = rng.integers(0, self.m, size=self.m)
        return BackgroundSet(self.X[rows], "bootstrap", seed)
