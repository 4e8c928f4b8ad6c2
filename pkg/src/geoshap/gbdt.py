"""Self-contained gradient-boosted regression trees (squared-error loss).

Splits are exact greedy on sorted values with midpoint thresholds. Tie-breaks
are total (lowest gain-maximizing feature index, then lowest threshold), so a
fit is reproducible across platforms. No histograms, no early stopping; the
tuner owns capacity control.
"""

import json
import warnings
from dataclasses import asdict, dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from ._validation import check_matrix, check_seed, check_vector
from .errors import CorruptModelFile, DegenerateFeatureWarning, TooFewRows

MODEL_FORMAT = "geoshap-gbdt"
MODEL_VERSION = 1

# relative gain floor; below this a node is noise-level and becomes a leaf
_GAIN_EPS = 1e-12


@dataclass(frozen=True)
class GbdtParams:
    n_trees: int = 100
    max_depth: int = 3
    learning_rate: float = 0.1
    min_samples_leaf: int = 1
    subsample: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError(f"n_trees must be >= 1, got {self.n_trees}")
        if self.max_depth < 1:
            raise ValueError(f"max_depth must be >= 1, got {self.max_depth}")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError(f"learning_rate must be in (0, 1], got {self.learning_rate}")
        if self.min_samples_leaf < 1:
            raise ValueError(f"min_samples_leaf must be >= 1, got {self.min_samples_leaf}")
        if not 0.0 < self.subsample <= 1.0:
            raise ValueError(f"subsample must be in (0, 1], got {self.subsample}")
        check_seed(self.seed)

    def as_dict(self):
        return asdict(self)


class _Tree:
    """Flat-array binary regression tree. feature == -1 marks a leaf."""

    __slots__ = ("feature", "threshold", "left", "right", "value")

    def __init__(self, feature, threshold, left, right, value):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=np.float64)

    def predict(self, X):
        node = np.zeros(X.shape[0], dtype=np.int64)
        # every pass pushes all rows at internal nodes one level down
        while True:
            feat = self.feature[node]
            internal = feat >= 0
            if not internal.any():
                break
            idx = np.nonzero(internal)[0]
            cur = node[idx]
            go_left = X[idx, feat[internal]] <= self.threshold[cur]
            node[idx] = np.where(go_left, self.left[cur], self.right[cur])
        return self.value[node]

    def to_dict(self):
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        try:
            tree = cls(d["feature"], d["threshold"], d["left"], d["right"], d["value"])
        except (KeyError, TypeError, ValueError) as exc:
            raise CorruptModelFile(f"bad tree record: {exc}") from None
        sizes = {arr.shape[0] for arr in (tree.feature, tree.threshold, tree.left, tree.right, tree.value)}
        if len(sizes) != 1 or 0 in sizes:
            raise CorruptModelFile("tree arrays have inconsistent lengths")
        return tree


def _best_split(Xn, residual, min_leaf):
    """Exact greedy split of one node. Returns (gain, feature, threshold) or None.

    gain is the SSE reduction; candidate thresholds are midpoints between
    adjacent distinct sorted values. Ties resolve to the lowest feature index,
    then the lowest threshold (argmax picks the first maximum and thresholds
    ascend with the scan position).
    """
    n = residual.shape[0]
    if n < 2 * min_leaf:
        return None
    total = residual.sum()
    base = total * total / n
    best = None
    for f in range(Xn.shape[1]):
        order = np.argsort(Xn[:, f], kind="stable")
        sv = Xn[order, f]
        left_sum = np.cumsum(residual[order])[:-1]
        counts = np.arange(1, n)
        valid = sv[:-1] < sv[1:]
        if min_leaf > 1:
            valid = valid.copy()
            valid[: min_leaf - 1] = False
            valid[n - min_leaf :] = False
        if not valid.any():
            continue
        right_sum = total - left_sum
        gain = left_sum**2 / counts + right_sum**2 / (n - counts) - base
        gain[~valid] = -np.inf
        pos = int(np.argmax(gain))
        g = float(gain[pos])
        if g <= 0:
            continue
        if best is None or g > best[0]:
            thr = (sv[pos] + sv[pos + 1]) / 2.0
            best = (g, f, float(thr))
    return best


def _grow_tree(X, residual, max_depth, min_leaf, gain_floor):
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        return len(feature) - 1

    # depth-first, left child first, so node numbering is deterministic
    stack = [(new_node(), np.arange(X.shape[0]), 0)]
    while stack:
        node, rows, depth = stack.pop()
        r = residual[rows]
        split = None
        if depth < max_depth:
            split = _best_split(X[rows], r, min_leaf)
            if split is not None and split[0] <= gain_floor:
                split = None
        if split is None:
            value[node] = float(r.mean())
            continue
        _, f, thr = split
        go_left = X[rows, f] <= thr
        feature[node] = f
        threshold[node] = thr
        left_id = new_node()
        right_id = new_node()
        left[node] = left_id
        right[node] = right_id
        stack.append((right_id, rows[~go_left], depth + 1))
        stack.append((left_id, rows[go_left], depth + 1))
    return _Tree(feature, threshold, left, right, value)


class GradientBoostedRegressor(BaseEstimator, RegressorMixin):
    """Least-squares gradient boosting over exact-split regression trees.

    Deterministic given (data, params): same inputs serialize to identical
    model files. Fitted attributes: ``base_score_``, ``trees_``,
    ``n_features_in_``, ``train_losses_`` (full-data MSE after each round).
    """

    def __init__(self, n_trees=100, max_depth=3, learning_rate=0.1,
                 min_samples_leaf=1, subsample=1.0, seed=0):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.learning_rate = learning_rate
        self.min_samples_leaf = min_samples_leaf
        self.subsample = subsample
        self.seed = seed

    @property
    def params(self):
        return GbdtParams(**self.get_params())

    def fit(self, X, y):
        params = self.params  # validates hyperparameters
        X = check_matrix(X, allow_empty=False)
        y = check_vector(y, length=X.shape[0])
        n = X.shape[0]
        if n < 2 * params.min_samples_leaf:
            raise TooFewRows(
                f"need n >= 2*min_samples_leaf = {2 * params.min_samples_leaf}, got {n}"
            )
        constant = [
            j for j in range(X.shape[1]) if np.all(X[:, j] == X[0, j])
        ]
        if constant:
            warnings.warn(
                f"constant feature column(s) {constant} carry no signal",
                DegenerateFeatureWarning,
                stacklevel=2,
            )

        rng = np.random.default_rng(params.seed)
        self.n_features_in_ = X.shape[1]
        self.base_score_ = float(y.mean())
        self.trees_ = []
        self.train_losses_ = []
        pred = np.full(n, self.base_score_)
        y_scale = max(1.0, float(np.mean(y * y)))
        n_sub = max(1, int(np.ceil(params.subsample * n)))
        for _ in range(params.n_trees):
            if params.subsample < 1.0:
                rows = np.sort(rng.choice(n, size=n_sub, replace=False))
            else:
                rows = slice(None)
            residual = y - pred
            tree = _grow_tree(
                X[rows], residual[rows] if params.subsample < 1.0 else residual,
                params.max_depth, params.min_samples_leaf, _GAIN_EPS * y_scale,
            )
            pred = pred + params.learning_rate * tree.predict(X)
            self.trees_.append(tree)
            self.train_losses_.append(float(np.mean((y - pred) ** 2)))
        return self

    def predict(self, X):
        if not hasattr(self, "trees_"):
            raise RuntimeError("model is not fitted")
        X = check_matrix(X, n_cols=self.n_features_in_)
        out = np.full(X.shape[0], self.base_score_)
        for tree in self.trees_:
            out += self.learning_rate * tree.predict(X)
        return out

    # --- persistence (canonical JSON, versioned) ---------------------------

    def to_dict(self):
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "params": self.params.as_dict(),
            "n_features": self.n_features_in_,
            "base_score": self.base_score_,
            "trees": [t.to_dict() for t in self.trees_],
        }

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, allow_nan=False, separators=(",", ":"))
            fh.write("\n")

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict) or d.get("format") != MODEL_FORMAT:
            raise CorruptModelFile("not a gbdt model file")
        if d.get("version") != MODEL_VERSION:
            raise CorruptModelFile(
                f"model file version {d.get('version')!r} is not supported "
                f"(expected {MODEL_VERSION})"
            )
        try:
            params = GbdtParams(**d["params"])
            model = cls(**params.as_dict())
            model.n_features_in_ = int(d["n_features"])
            model.base_score_ = float(d["base_score"])
            model.trees_ = [_Tree.from_dict(t) for t in d["trees"]]
            model.train_losses_ = []
        except CorruptModelFile:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise CorruptModelFile(f"bad model record: {exc}") from None
        return model

    @classmethod
    def load(cls, path):
        try:
            with open(path, "r", encoding="utf-8") as fh:
                d = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise CorruptModelFile(f"cannot read model file {path}: {exc}") from None
        return cls.from_dict(d)
