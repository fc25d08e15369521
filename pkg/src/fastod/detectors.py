"""Unsupervised outlier detector zoo with a uniform fit/score contract.

Every detector follows the same convention: ``fit(X)`` computes
``decision_scores_`` for the training rows and ``decision_function(X)``
scores new rows, with higher always meaning more outlying. Fitting
excludes a point from its own neighborhood; at prediction time every
stored training point is an eligible neighbor (no self-exclusion), so
scoring the training matrix back through ``decision_function`` is allowed
but intentionally not identical to the fit-time scores.

All randomness flows from explicit seeds; fitted detectors are immutable
in practice and safe to ship across worker processes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.neighbors import NearestNeighbors

from ._validation import ConfigError, DataError, check_matrix
from .data import DataMatrix
from .projection import ProjectionPlan

ALGORITHMS = ("knn", "aknn", "lof", "fastabod", "hbos", "iforest",
              "featurebagging")

_EPS = 1e-10
_NORM_EPS = 1e-12


@dataclass(frozen=True)
class DetectorSpec:
    """Declarative description of one ensemble member."""

    algo: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.algo not in ALGORITHMS:
            raise ConfigError(
                f"unknown detector algorithm {self.algo!r}; "
                f"choose from {', '.join(ALGORITHMS)}"
            )
        object.__setattr__(self, "params", dict(self.params))

    def digest(self) -> str:
        """Canonical hyperparameter string, stable across runs."""
        items = sorted(self.params.items())
        return ";".join(f"{k}={v}" for k, v in items) if items else "default"


class BaseDetector(BaseEstimator):
    """Shared plumbing for the zoo: validation and the fit/score contract."""

    def fit(self, X, y=None):
        X = check_matrix(X, min_rows=2)
        self.n_features_in_ = X.shape[1]
        self._fit(X)
        return self

    def decision_function(self, X) -> np.ndarray:
        if not hasattr(self, "decision_scores_"):
            raise DataError("detector is not fitted")
        X = check_matrix(X)
        if X.shape[1] != self.n_features_in_:
            raise DataError(
                f"X has {X.shape[1]} features, detector was fit on "
                f"{self.n_features_in_}"
            )
        return self._score(X)

    # subclasses implement _fit / _score / state import-export
    def _fit(self, X):  # pragma: no cover - abstract
        raise NotImplementedError

    def _score(self, X):  # pragma: no cover - abstract
        raise NotImplementedError

    def _export_state(self) -> dict[str, np.ndarray]:  # pragma: no cover
        raise NotImplementedError

    def _import_state(self, arrays: dict[str, np.ndarray]):  # pragma: no cover
        raise NotImplementedError


def _fit_neighbor_index(X: np.ndarray) -> NearestNeighbors:
    return NearestNeighbors().fit(X)


class _NeighborDetector(BaseDetector):
    """Base for detectors built on exact k-nearest-neighbor queries."""

    def __init__(self, n_neighbors=10):
        self.n_neighbors = n_neighbors

    def _check_k(self, n):
        if self.n_neighbors < 1:
            raise ConfigError(f"n_neighbors must be >= 1, got {self.n_neighbors}")
        if self.n_neighbors >= n:
            raise DataError(
                f"n_neighbors={self.n_neighbors} needs more than "
                f"{self.n_neighbors} training points, got {n}"
            )

    def _train_neighbors(self, X):
        """Distances/indices of each training point's k neighbors, self excluded."""
        dist, idx = self.nn_.kneighbors(X, n_neighbors=self.n_neighbors + 1)
        return dist[:, 1:], idx[:, 1:]

    def _query_neighbors(self, X):
        """k nearest stored training points for each query row."""
        return self.nn_.kneighbors(X, n_neighbors=self.n_neighbors)

    def _base_state(self):
        return {
            "train": self.X_train_.copy(),
            "scores": self.decision_scores_.copy(),
        }

    def _restore_base(self, arrays):
        self.X_train_ = arrays["train"].copy()
        self.nn_ = _fit_neighbor_index(self.X_train_)
        self.decision_scores_ = arrays["scores"].copy()
        self.n_features_in_ = self.X_train_.shape[1]


class KNN(_NeighborDetector):
    """Distance to the k-th nearest neighbor."""

    def _fit(self, X):
        self._check_k(X.shape[0])
        self.X_train_ = X
        self.nn_ = _fit_neighbor_index(X)
        dist, _ = self._train_neighbors(X)
        self.decision_scores_ = dist[:, -1].copy()

    def _score(self, X):
        dist, _ = self._query_neighbors(X)
        return dist[:, -1].copy()

    _export_state = _NeighborDetector._base_state
    _import_state = _NeighborDetector._restore_base


class AvgKNN(_NeighborDetector):
    """Mean distance to the k nearest neighbors."""

    def _fit(self, X):
        self._check_k(X.shape[0])
        self.X_train_ = X
        self.nn_ = _fit_neighbor_index(X)
        dist, _ = self._train_neighbors(X)
        self.decision_scores_ = dist.mean(axis=1)

    def _score(self, X):
        dist, _ = self._query_neighbors(X)
        return dist.mean(axis=1)

    _export_state = _NeighborDetector._base_state
    _import_state = _NeighborDetector._restore_base


class LOF(_NeighborDetector):
    """Local outlier factor with classic reachability distances.

    Fit computes k-distances and local reachability densities of the
    training points; new points are scored against that stored state, so
    held-out scores can be recomputed from it exactly.
    """

    @staticmethod
    def _lrd(reach: np.ndarray) -> np.ndarray:
        mean_reach = reach.mean(axis=1)
        # zero mean reachability only happens for exact duplicates; the
        # guard keeps their factor at ~1 instead of producing inf/inf
        mean_reach[mean_reach == 0.0] = _EPS
        return 1.0 / mean_reach

    def _fit(self, X):
        self._check_k(X.shape[0])
        self.X_train_ = X
        self.nn_ = _fit_neighbor_index(X)
        dist, idx = self._train_neighbors(X)
        self.kdist_ = dist[:, -1].copy()
        self.lrd_ = self._lrd(np.maximum(self.kdist_[idx], dist))
        self.decision_scores_ = self.lrd_[idx].mean(axis=1) / self.lrd_

    def _score(self, X):
        dist, idx = self._query_neighbors(X)
        reach = np.maximum(self.kdist_[idx], dist)
        return self.lrd_[idx].mean(axis=1) / self._lrd(reach)

    def _export_state(self):
        state = self._base_state()
        state["kdist"] = self.kdist_.copy()
        state["lrd"] = self.lrd_.copy()
        return state

    def _import_state(self, arrays):
        self._restore_base(arrays)
        self.kdist_ = arrays["kdist"].copy()
        self.lrd_ = arrays["lrd"].copy()


class FastABOD(_NeighborDetector):
    """Angle-based outlying score restricted to the k-neighborhood.

    The score is the negated variance of the distance-weighted angles
    cos(a, b) / (|a| * |b|) over all neighbor pairs, so that small angular
    spread (an outlier looking at the data from outside) scores high.
    Pairs involving a difference vector shorter than 1e-12 are skipped; a
    point with no valid pair scores 0.
    """

    def _abof(self, X, neighbor_idx):
        scores = np.empty(X.shape[0])
        iu, ju = np.triu_indices(neighbor_idx.shape[1], k=1)
        for i in range(X.shape[0]):
            vectors = self.X_train_[neighbor_idx[i]] - X[i]
            gram = vectors @ vectors.T
            sq = np.diag(gram)
            with np.errstate(divide="ignore", invalid="ignore"):
                terms = gram[iu, ju] / (sq[iu] * sq[ju])
            valid = (np.sqrt(sq[iu]) >= _NORM_EPS) & (np.sqrt(sq[ju]) >= _NORM_EPS)
            if not valid.any():
                scores[i] = 0.0
                continue
            kept = terms[valid]
            scores[i] = -float(np.var(kept))
        return scores

    def _fit(self, X):
        self._check_k(X.shape[0])
        self.X_train_ = X
        self.nn_ = _fit_neighbor_index(X)
        _, idx = self._train_neighbors(X)
        self.decision_scores_ = self._abof(X, idx)

    def _score(self, X):
        _, idx = self._query_neighbors(X)
        return self._abof(X, idx)

    _export_state = _NeighborDetector._base_state
    _import_state = _NeighborDetector._restore_base


class HBOS(BaseDetector):
    """Histogram-based outlier score.

    One equal-width histogram per feature over the training range with
    Laplace smoothing of one count per bin; the score of a row is the sum
    over features of the negative log density of its bin. Out-of-range
    values clamp to the edge bins. Constant features contribute nothing.

    Parameters
    ----------
    n_bins : int or None
        None picks ceil(sqrt(n)) at fit time.
    """

    def __init__(self, n_bins=None):
        self.n_bins = n_bins

    def _fit(self, X):
        n, d = X.shape
        bins = self.n_bins if self.n_bins is not None else math.ceil(math.sqrt(n))
        if bins < 2:
            raise ConfigError(f"n_bins must be >= 2, got {bins}")
        self.bins_ = bins
        self.lo_ = X.min(axis=0)
        hi = X.max(axis=0)
        self.width_ = (hi - self.lo_) / bins
        self.log_density_ = np.zeros((d, bins))
        for f in range(d):
            if self.width_[f] < _NORM_EPS:
                self.width_[f] = 0.0  # flag: degenerate feature
                continue
            counts, _ = np.histogram(X[:, f], bins=bins,
                                     range=(self.lo_[f], hi[f]))
            density = (counts + 1.0) / ((n + bins) * self.width_[f])
            self.log_density_[f] = np.log(density)
        self.decision_scores_ = self._score(X)

    def _score(self, X):
        scores = np.zeros(X.shape[0])
        for f in range(X.shape[1]):
            if self.width_[f] == 0.0:
                continue
            raw = np.floor((X[:, f] - self.lo_[f]) / self.width_[f]).astype(np.int64)
            binned = np.clip(raw, 0, self.bins_ - 1)
            scores -= self.log_density_[f][binned]
        return scores

    def _export_state(self):
        return {
            "lo": self.lo_.copy(),
            "width": self.width_.copy(),
            "log_density": self.log_density_.copy(),
            "scores": self.decision_scores_.copy(),
            "meta": np.array([self.bins_], dtype=np.float64),
        }

    def _import_state(self, arrays):
        self.lo_ = arrays["lo"].copy()
        self.width_ = arrays["width"].copy()
        self.log_density_ = arrays["log_density"].copy()
        self.decision_scores_ = arrays["scores"].copy()
        self.bins_ = int(arrays["meta"][0])
        self.n_features_in_ = self.lo_.shape[0]


def _harmonic(m: float) -> float:
    return math.log(m) + 0.5772156649015329


def _avg_path_length(m: int) -> float:
    """Average unsuccessful-search path length in a BST of m points."""
    if m <= 1:
        return 0.0
    if m == 2:
        return 1.0
    return 2.0 * _harmonic(m - 1) - 2.0 * (m - 1) / m


@dataclass
class _IsolationTree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    size: np.ndarray

    def path_lengths(self, X):
        out = np.zeros(X.shape[0])
        stack = [(0, np.arange(X.shape[0]), 0)]
        while stack:
            node, idx, depth = stack.pop()
            if self.feature[node] < 0:
                out[idx] = depth + _avg_path_length(int(self.size[node]))
                continue
            go_left = X[idx, self.feature[node]] <= self.threshold[node]
            if go_left.any():
                stack.append((self.left[node], idx[go_left], depth + 1))
            if not go_left.all():
                stack.append((self.right[node], idx[~go_left], depth + 1))
        return out

    def as_matrix(self):
        return np.column_stack([
            self.feature.astype(np.float64), self.threshold,
            self.left.astype(np.float64), self.right.astype(np.float64),
            self.size.astype(np.float64),
        ])

    @classmethod
    def from_matrix(cls, m):
        return cls(
            feature=m[:, 0].astype(np.int64),
            threshold=m[:, 1].copy(),
            left=m[:, 2].astype(np.int64),
            right=m[:, 3].astype(np.int64),
            size=m[:, 4].astype(np.int64),
        )


class IForest(BaseDetector):
    """Isolation forest with the standard 2^(-E[h]/c(psi)) anomaly score.

    Parameters
    ----------
    n_trees : int, default=100
    subsample : int, default=256
        Per-tree sample size, capped at n.
    random_state : int, default=0
    """

    def __init__(self, n_trees=100, subsample=256, random_state=0):
        self.n_trees = n_trees
        self.subsample = subsample
        self.random_state = random_state

    def _grow(self, X, sample, height_limit, rng) -> _IsolationTree:
        feature, threshold, left, right, size = [], [], [], [], []

        def new_node():
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            size.append(0)
            return len(feature) - 1

        stack = [(new_node(), sample, 0)]
        while stack:
            node, idx, depth = stack.pop()
            size[node] = idx.size
            if depth >= height_limit or idx.size <= 1:
                continue
            sub = X[idx]
            lo = sub.min(axis=0)
            hi = sub.max(axis=0)
            splittable = np.flatnonzero(hi > lo)
            if splittable.size == 0:
                continue
            f = int(rng.choice(splittable))
            thr = rng.uniform(lo[f], hi[f])
            go_left = sub[:, f] <= thr
            feature[node] = f
            threshold[node] = thr
            left[node] = new_node()
            right[node] = new_node()
            stack.append((right[node], idx[~go_left], depth + 1))
            stack.append((left[node], idx[go_left], depth + 1))
        return _IsolationTree(
            feature=np.asarray(feature, dtype=np.int64),
            threshold=np.asarray(threshold),
            left=np.asarray(left, dtype=np.int64),
            right=np.asarray(right, dtype=np.int64),
            size=np.asarray(size, dtype=np.int64),
        )

    def _fit(self, X):
        if self.n_trees < 1:
            raise ConfigError(f"n_trees must be >= 1, got {self.n_trees}")
        n = X.shape[0]
        psi = min(self.subsample, n)
        height_limit = max(1, math.ceil(math.log2(max(psi, 2))))
        self.psi_ = psi
        self.trees_ = []
        for seq in np.random.SeedSequence(self.random_state).spawn(self.n_trees):
            rng = np.random.default_rng(seq)
            sample = rng.choice(n, size=psi, replace=False)
            self.trees_.append(self._grow(X, sample, height_limit, rng))
        self.decision_scores_ = self._score(X)

    def _score(self, X):
        depths = np.zeros(X.shape[0])
        for tree in self.trees_:
            depths += tree.path_lengths(X)
        depths /= len(self.trees_)
        return np.power(2.0, -depths / _avg_path_length(self.psi_))

    def _export_state(self):
        mats = [t.as_matrix() for t in self.trees_]
        offsets = np.cumsum([0] + [m.shape[0] for m in mats]).astype(np.float64)
        return {
            "nodes": np.vstack(mats),
            "offsets": offsets,
            "scores": self.decision_scores_.copy(),
            "meta": np.array([self.psi_, self.n_features_in_], dtype=np.float64),
        }

    def _import_state(self, arrays):
        offsets = arrays["offsets"].astype(np.int64)
        nodes = arrays["nodes"]
        self.trees_ = [
            _IsolationTree.from_matrix(nodes[offsets[i]:offsets[i + 1]])
            for i in range(len(offsets) - 1)
        ]
        self.decision_scores_ = arrays["scores"].copy()
        self.psi_ = int(arrays["meta"][0])
        self.n_features_in_ = int(arrays["meta"][1])


class FeatureBagging(BaseDetector):
    """Average of LOF sub-detectors fit on random feature subsets.

    Each sub-detector draws a subset of between ceil(d/2) and d distinct
    features and fits LOF there; scores are averaged with equal weight.

    Parameters
    ----------
    n_sub_detectors : int, default=10
    n_neighbors : int, default=10
        Passed to every LOF sub-detector.
    random_state : int, default=0
    """

    def __init__(self, n_sub_detectors=10, n_neighbors=10, random_state=0):
        self.n_sub_detectors = n_sub_detectors
        self.n_neighbors = n_neighbors
        self.random_state = random_state

    def _fit(self, X):
        if self.n_sub_detectors < 1:
            raise ConfigError(
                f"n_sub_detectors must be >= 1, got {self.n_sub_detectors}"
            )
        d = X.shape[1]
        rng = np.random.default_rng(self.random_state)
        low = math.ceil(d / 2)
        self.subsets_ = []
        self.subs_ = []
        for _ in range(self.n_sub_detectors):
            size = int(rng.integers(low, d + 1))
            feats = np.sort(rng.choice(d, size=size, replace=False))
            sub = LOF(n_neighbors=self.n_neighbors)
            sub.fit(X[:, feats])
            self.subsets_.append(feats)
            self.subs_.append(sub)
        self.decision_scores_ = np.mean(
            [sub.decision_scores_ for sub in self.subs_], axis=0
        )

    def _score(self, X):
        return np.mean(
            [sub.decision_function(X[:, feats])
             for sub, feats in zip(self.subs_, self.subsets_)],
            axis=0,
        )

    def _export_state(self):
        state = {"scores": self.decision_scores_.copy(),
                 "meta": np.array([len(self.subs_), self.n_features_in_],
                                  dtype=np.float64)}
        for i, (sub, feats) in enumerate(zip(self.subs_, self.subsets_)):
            state[f"sub{i}_feats"] = feats.astype(np.float64)
            for key, arr in sub._export_state().items():
                state[f"sub{i}_{key}"] = arr
        return state

    def _import_state(self, arrays):
        count = int(arrays["meta"][0])
        self.n_features_in_ = int(arrays["meta"][1])
        self.decision_scores_ = arrays["scores"].copy()
        self.subsets_ = []
        self.subs_ = []
        for i in range(count):
            feats = arrays[f"sub{i}_feats"].astype(np.int64)
            sub = LOF(n_neighbors=self.n_neighbors)
            sub._import_state({
                key[len(f"sub{i}_"):]: arr
                for key, arr in arrays.items()
                if key.startswith(f"sub{i}_") and not key.endswith("_feats")
            })
            self.subsets_.append(feats)
            self.subs_.append(sub)


_REGISTRY = {
    "knn": (KNN, False),
    "aknn": (AvgKNN, False),
    "lof": (LOF, False),
    "fastabod": (FastABOD, False),
    "hbos": (HBOS, False),
    "iforest": (IForest, True),
    "featurebagging": (FeatureBagging, True),
}


def make_estimator(spec: DetectorSpec) -> BaseDetector:
    """Instantiate the estimator a spec describes (unfitted)."""
    cls, takes_seed = _REGISTRY[spec.algo]
    kwargs = dict(spec.params)
    if takes_seed:
        kwargs.setdefault("random_state", spec.seed)
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for {spec.algo!r}: {exc}") from None


@dataclass
class FittedDetector:
    """A fitted ensemble member plus the subspace it was trained on."""

    spec: DetectorSpec
    plan: ProjectionPlan
    estimator: BaseDetector

    @property
    def train_scores(self) -> np.ndarray:
        return self.estimator.decision_scores_

    def score(self, X) -> np.ndarray:
        """Project rows of the original feature space, then score them."""
        values = X.values if isinstance(X, DataMatrix) else check_matrix(X)
        return self.estimator.decision_function(self.plan.transform(values))


def fit_detector(spec: DetectorSpec, X_sub: DataMatrix,
                 plan: ProjectionPlan) -> FittedDetector:
    """Fit one detector on an already-projected training matrix.

    Parameters
    ----------
    spec : DetectorSpec
    X_sub : DataMatrix
        The training data after ``plan`` was applied; its width must be
        the plan's target dimension.
    plan : ProjectionPlan
        Kept on the result so unseen data can be routed into the same
        subspace before scoring.
    """
    if X_sub.d != plan.k:
        raise DataError(
            f"projected matrix has d={X_sub.d} but plan targets k={plan.k}"
        )
    estimator = make_estimator(spec)
    estimator.fit(X_sub.values)
    return FittedDetector(spec=spec, plan=plan, estimator=estimator)


def restore_detector(spec: DetectorSpec, plan: ProjectionPlan,
                     arrays: dict[str, np.ndarray]) -> FittedDetector:
    """Rebuild a fitted detector from bundle arrays."""
    estimator = make_estimator(spec)
    estimator._import_state(arrays)
    return FittedDetector(spec=spec, plan=plan, estimator=estimator)
