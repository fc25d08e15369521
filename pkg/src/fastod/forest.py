"""Self-contained random-forest regressor.

CART-style binary regression trees with variance-reduction splits, grown
on bootstrap resamples over a random subset of candidate features per
node. The split search scans sorted unique values exactly and places
thresholds at midpoints; ties in variance reduction resolve to the lowest
feature index, then the lowest threshold, so a (X, y, params) triple maps
to exactly one forest.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import ConfigError, DataError, check_matrix, check_vector


@dataclass(frozen=True)
class ForestParams:
    """Forest hyperparameters as carried in configs and bundles."""

    n_trees: int = 100
    max_depth: int | None = None
    min_samples_leaf: int = 2
    mtry: int | None = None
    seed: int = 0
    bootstrap: bool = True

    def __post_init__(self):
        if self.n_trees < 1:
            raise ConfigError(f"n_trees must be >= 1, got {self.n_trees}")
        if self.min_samples_leaf < 1:
            raise ConfigError(
                f"min_samples_leaf must be >= 1, got {self.min_samples_leaf}"
            )
        if self.max_depth is not None and self.max_depth < 0:
            raise ConfigError(f"max_depth must be >= 0, got {self.max_depth}")
        if self.mtry is not None and self.mtry < 1:
            raise ConfigError(f"mtry must be >= 1, got {self.mtry}")

    def make_estimator(self) -> "ForestRegressor":
        return ForestRegressor(
            n_trees=self.n_trees,
            max_depth=self.max_depth,
            min_samples_leaf=self.min_samples_leaf,
            mtry=self.mtry,
            bootstrap=self.bootstrap,
            random_state=self.seed,
        )


@dataclass
class _Tree:
    """Flat-array binary tree; leaves have feature == -1."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def predict(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(X.shape[0])
        # route index blocks down the tree instead of walking row by row
        stack = [(0, np.arange(X.shape[0]))]
        while stack:
            node, idx = stack.pop()
            if self.feature[node] < 0:
                out[idx] = self.value[node]
                continue
            go_left = X[idx, self.feature[node]] <= self.threshold[node]
            left_idx = idx[go_left]
            right_idx = idx[~go_left]
            if left_idx.size:
                stack.append((self.left[node], left_idx))
            if right_idx.size:
                stack.append((self.right[node], right_idx))
        return out

    def as_matrix(self) -> np.ndarray:
        return np.column_stack([
            self.feature.astype(np.float64),
            self.threshold,
            self.left.astype(np.float64),
            self.right.astype(np.float64),
            self.value,
        ])

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "_Tree":
        return cls(
            feature=m[:, 0].astype(np.int64),
            threshold=m[:, 1].copy(),
            left=m[:, 2].astype(np.int64),
            right=m[:, 3].astype(np.int64),
            value=m[:, 4].copy(),
        )


def _best_split(X, y, sample_idx, features, min_leaf):
    """Best (gain, reduction, feature, threshold) over candidate features.

    ``y`` is expected centered on the node mean; maximizing
    sum_left^2/n_left + sum_right^2/n_right then maximizes the total
    squared-error reduction. Returns None when no admissible split exists.
    """
    s = sample_idx.size
    best = None
    best_gain = -np.inf
    total_sq_over_n = None
    for f in features:
        x = X[sample_idx, f]
        order = np.argsort(x, kind="stable")
        xs = x[order]
        ys = y[order]
        csum = np.cumsum(ys)
        total = csum[-1]
        if total_sq_over_n is None:
            total_sq_over_n = total * total / s
        n_left = np.arange(1, s)
        valid = xs[1:] > xs[:-1]
        if min_leaf > 1:
            valid &= (n_left >= min_leaf) & (s - n_left >= min_leaf)
        if not valid.any():
            continue
        sum_left = csum[:-1]
        with np.errstate(invalid="ignore"):
            gain = sum_left**2 / n_left + (total - sum_left) ** 2 / (s - n_left)
        gain[~valid] = -np.inf
        pos = int(np.argmax(gain))  # first max: lowest threshold wins ties
        if gain[pos] > best_gain:
            best_gain = gain[pos]
            best = (f, 0.5 * (xs[pos] + xs[pos + 1]))
    if best is None:
        return None
    reduction = best_gain - total_sq_over_n
    if reduction <= 0:
        return None
    return best_gain, reduction, best[0], best[1]


class ForestRegressor(BaseEstimator):
    """Bagged regression trees with deterministic growth under a seed.

    Parameters
    ----------
    n_trees : int, default=100
    max_depth : int or None, default=None
        None grows until the leaf-size or variance stop fires.
    min_samples_leaf : int, default=2
        Both children of any split keep at least this many samples.
    mtry : int or None, default=None
        Candidate features per split; None means max(1, d // 3).
    bootstrap : bool, default=True
        Grow each tree on an n-sample resample drawn with replacement.
    random_state : int, default=0

    Attributes
    ----------
    trees_ : list
        Fitted trees in flat-array form.
    feature_importances_ : numpy.ndarray of shape (d,)
        Normalized total variance reduction per feature; all zeros when
        no tree ever split.
    """

    def __init__(self, n_trees=100, max_depth=None, min_samples_leaf=2,
                 mtry=None, bootstrap=True, random_state=0):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.mtry = mtry
        self.bootstrap = bootstrap
        self.random_state = random_state

    def _params(self) -> ForestParams:
        return ForestParams(
            n_trees=self.n_trees,
            max_depth=self.max_depth,
            min_samples_leaf=self.min_samples_leaf,
            mtry=self.mtry,
            seed=self.random_state,
            bootstrap=self.bootstrap,
        )

    def fit(self, X, y):
        params = self._params()  # validates hyperparameters
        X = check_matrix(X, min_rows=2)
        y = check_vector(y, length=X.shape[0])
        n, d = X.shape
        mtry = params.mtry if params.mtry is not None else max(1, d // 3)
        if mtry > d:
            raise ConfigError(f"mtry={mtry} exceeds feature count {d}")
        importance = np.zeros(d)
        seeds = np.random.SeedSequence(params.seed).spawn(params.n_trees)
        self.trees_ = []
        for seq in seeds:
            rng = np.random.default_rng(seq)
            if params.bootstrap:
                sample = rng.integers(0, n, size=n)
            else:
                sample = np.arange(n)
            self.trees_.append(
                self._grow_tree(X, y, sample, mtry, rng, importance)
            )
        total = importance.sum()
        self.feature_importances_ = importance / total if total > 0 else importance
        self.n_features_in_ = d
        self.y_min_ = float(y.min())
        self.y_max_ = float(y.max())
        return self

    def _grow_tree(self, X, y, sample, mtry, rng, importance) -> _Tree:
        max_depth = self.max_depth
        min_leaf = self.min_samples_leaf
        d = X.shape[1]
        feature, threshold, left, right, value = [], [], [], [], []

        def new_node():
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(0.0)
            return len(feature) - 1

        root = new_node()
        stack = [(root, sample, 0)]
        while stack:
            node, idx, depth = stack.pop()
            y_node = y[idx]
            mean = y_node.mean()
            value[node] = mean
            if (
                idx.size < 2 * min_leaf
                or (max_depth is not None and depth >= max_depth)
                or np.ptp(y_node) == 0.0
            ):
                continue
            cand = np.sort(rng.choice(d, size=mtry, replace=False))
            split = _best_split(X, y_node - mean, idx, cand, min_leaf)
            if split is None:
                continue
            _, reduction, f, thr = split
            importance[f] += reduction
            feature[node] = f
            threshold[node] = thr
            go_left = X[idx, f] <= thr
            left_idx = idx[go_left]
            right_idx = idx[~go_left]
            left[node] = new_node()
            right[node] = new_node()
            # push right first so the left child is processed next (preorder)
            stack.append((right[node], right_idx, depth + 1))
            stack.append((left[node], left_idx, depth + 1))
        return _Tree(
            feature=np.asarray(feature, dtype=np.int64),
            threshold=np.asarray(threshold),
            left=np.asarray(left, dtype=np.int64),
            right=np.asarray(right, dtype=np.int64),
            value=np.asarray(value),
        )

    def predict(self, X) -> np.ndarray:
        if not hasattr(self, "trees_"):
            raise DataError("forest is not fitted")
        X = check_matrix(X)
        if X.shape[1] != self.n_features_in_:
            raise DataError(
                f"X has {X.shape[1]} features, forest expects {self.n_features_in_}"
            )
        acc = np.zeros(X.shape[0])
        for tree in self.trees_:
            acc += tree.predict(X)
        return acc / len(self.trees_)

    # -- flat-array form used by the bundle writer --------------------------

    def to_arrays(self) -> dict[str, np.ndarray]:
        """Fitted state as float64 arrays (nodes are rows of
        [feature, threshold, left, right, value])."""
        mats = [t.as_matrix() for t in self.trees_]
        offsets = np.cumsum([0] + [m.shape[0] for m in mats]).astype(np.float64)
        return {
            "nodes": np.vstack(mats),
            "offsets": offsets,
            "importances": self.feature_importances_.copy(),
            "meta": np.array(
                [self.n_features_in_, self.y_min_, self.y_max_], dtype=np.float64
            ),
        }

    @classmethod
    def from_arrays(cls, params: ForestParams,
                    arrays: dict[str, np.ndarray]) -> "ForestRegressor":
        est = params.make_estimator()
        offsets = arrays["offsets"].astype(np.int64)
        nodes = arrays["nodes"]
        est.trees_ = [
            _Tree.from_matrix(nodes[offsets[i]:offsets[i + 1]])
            for i in range(len(offsets) - 1)
        ]
        est.feature_importances_ = arrays["importances"].copy()
        meta = arrays["meta"]
        est.n_features_in_ = int(meta[0])
        est.y_min_ = float(meta[1])
        est.y_max_ = float(meta[2])
        return est


def fit_forest(X, y, params: ForestParams) -> ForestRegressor:
    """Functional entry point: fit one forest under explicit parameters."""
    return params.make_estimator().fit(X, y)


def predict_forest(forest: ForestRegressor, X) -> np.ndarray:
    return forest.predict(X)
