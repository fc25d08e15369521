"""Random subspace projections with distance-preservation diagnostics.

Implements four random linear maps built on Gaussian or Rademacher draws
(dense, sign-flip, circulant, and constant-diagonal variants), plus two
baselines (top-component PCA and plain random feature selection). The
random variants scale by 1/sqrt(k) so squared pairwise distances are
preserved in expectation; PCA and feature selection apply their matrices
unscaled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import toeplitz as _toeplitz
from scipy.spatial.distance import pdist

from ._validation import ConfigError, DataError, check_matrix, check_seed
from .data import DataMatrix

JL_METHODS = ("basic", "discrete", "circulant", "toeplitz")
METHODS = ("none",) + JL_METHODS + ("pca", "rs")

DEFAULT_THETA = 20
DEFAULT_EPSILON = 0.5


@dataclass(frozen=True)
class ProjectionPlan:
    """A realized k x d linear map from source to target dimension.

    ``matrix`` is None only for method "none" (identity). For "rs" the
    matrix is a 0/1 selection matrix with one 1 per row, all rows picking
    distinct features.
    """

    method: str
    d: int
    k: int
    seed: int
    matrix: np.ndarray | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown projection method {self.method!r}")
        if not 1 <= self.k <= self.d:
            raise ConfigError(f"need 1 <= k <= d, got k={self.k}, d={self.d}")
        if self.method == "none":
            if self.k != self.d or self.matrix is not None:
                raise ConfigError("method 'none' requires k == d and no matrix")
        else:
            if self.matrix is None or self.matrix.shape != (self.k, self.d):
                raise ConfigError(
                    f"method {self.method!r} requires a {self.k}x{self.d} matrix"
                )
            m = np.ascontiguousarray(self.matrix, dtype=np.float64)
            m.setflags(write=False)
            object.__setattr__(self, "matrix", m)

    @property
    def scale(self) -> float:
        """Row scale applied on top of the matrix product."""
        return 1.0 / math.sqrt(self.k) if self.method in JL_METHODS else 1.0

    def transform(self, values: np.ndarray) -> np.ndarray:
        """Project raw row vectors; see :func:`apply_plan` for matrices."""
        values = check_matrix(values)
        if values.shape[1] != self.d:
            raise DataError(
                f"matrix has {values.shape[1]} features, plan expects {self.d}"
            )
        if self.method == "none":
            return values
        return (values @ self.matrix.T) * self.scale


@dataclass(frozen=True)
class DistortionReport:
    """Summary of squared pairwise-distance ratios projected/original."""

    epsilon: float
    fraction_within: float
    max_ratio: float
    min_ratio: float


def decide_k(d: int, theta: int = DEFAULT_THETA) -> int | None:
    """Target dimension under the threshold rule, or None to skip projection.

    Projection is only invoked when the source dimension exceeds ``theta``
    (default 20); it then halves the dimension, rounding up.
    """
    if d < 1 or theta < 1:
        raise ConfigError(f"need d >= 1 and theta >= 1, got d={d}, theta={theta}")
    if d <= theta:
        return None
    return math.ceil(d / 2)


def make_plan(method: str, d: int, k: int, seed: int,
              X: np.ndarray | None = None) -> ProjectionPlan:
    """Draw the transform matrix for one projection variant.

    Parameters
    ----------
    method : str
        One of "none", "basic", "discrete", "circulant", "toeplitz",
        "pca", "rs".

        * basic: i.i.d. standard normal entries.
        * discrete: i.i.d. Rademacher entries, uniform on {-1, +1}.
        * circulant: first row standard normal, each later row the
          previous one rotated right by one position.
        * toeplitz: first row and first column standard normal (drawn in
          that order, sharing the corner entry), constant diagonals.
        * pca: top-k right singular vectors of the centered matrix ``X``
          (training data required).
        * rs: k distinct feature indices, sampled without replacement.
    d, k : int
        Source and target dimensions, 1 <= k <= d.
    seed : int
        Fixing (method, d, k, seed) fixes the matrix.
    X : numpy.ndarray, optional
        Training matrix; required for method "pca" only.

    Returns
    -------
    ProjectionPlan
    """
    seed = check_seed(seed)
    if method not in METHODS:
        raise ConfigError(f"unknown projection method {method!r}")
    if method == "none":
        return ProjectionPlan(method="none", d=d, k=d, seed=seed)
    if not 1 <= k <= d:
        raise ConfigError(f"need 1 <= k <= d, got k={k}, d={d}")
    rng = np.random.default_rng(seed)
    if method == "basic":
        matrix = rng.standard_normal((k, d))
    elif method == "discrete":
        matrix = rng.choice((-1.0, 1.0), size=(k, d))
    elif method == "circulant":
        first = rng.standard_normal(d)
        matrix = np.stack([np.roll(first, i) for i in range(k)])
    elif method == "toeplitz":
        row = rng.standard_normal(d)
        col = rng.standard_normal(k)
        col[0] = row[0]  # corner entry is shared
        matrix = _toeplitz(col, row)
    elif method == "pca":
        if X is None:
            raise ConfigError("method 'pca' requires the training matrix X")
        X = check_matrix(X, min_rows=2)
        if X.shape[1] != d:
            raise DataError(f"X has {X.shape[1]} features, expected {d}")
        centered = X - X.mean(axis=0)
        _, _, vt = np.linalg.svd(centered, full_matrices=False)
        if vt.shape[0] < k:
            raise DataError(
                f"only {vt.shape[0]} principal components available for k={k}"
            )
        components = vt[:k]
        # sign convention: largest-magnitude loading of each component is positive
        signs = np.sign(components[np.arange(k), np.abs(components).argmax(axis=1)])
        signs[signs == 0] = 1.0
        matrix = components * signs[:, None]
    else:  # rs
        picks = rng.choice(d, size=k, replace=False)
        matrix = np.zeros((k, d))
        matrix[np.arange(k), picks] = 1.0
    return ProjectionPlan(method=method, d=d, k=k, seed=seed, matrix=matrix)


def apply_plan(plan: ProjectionPlan, ds: DataMatrix) -> DataMatrix:
    """Project every row of ``ds``; labels carried through unchanged."""
    if ds.d != plan.d:
        raise DataError(f"data has d={ds.d}, plan expects d={plan.d}")
    if plan.method == "none":
        return ds
    return DataMatrix(plan.transform(ds.values), labels=ds.labels)


def distortion(X: DataMatrix | np.ndarray, Xp: DataMatrix | np.ndarray,
               epsilon: float = DEFAULT_EPSILON) -> DistortionReport:
    """Measure how well a projection preserved squared pairwise distances.

    Computes all n(n-1)/2 ratios of projected to original squared
    Euclidean distances and reports the fraction inside [1-eps, 1+eps]
    together with the extremes. Pairs of coincident source points count
    as ratio 1 when coincident after projection, else as infinite.
    """
    a = X.values if isinstance(X, DataMatrix) else check_matrix(X)
    b = Xp.values if isinstance(Xp, DataMatrix) else check_matrix(Xp)
    if a.shape[0] != b.shape[0]:
        raise DataError("X and Xp must have the same number of rows")
    if a.shape[0] < 2:
        raise DataError("distortion needs at least 2 points")
    orig = pdist(a, "sqeuclidean")
    proj = pdist(b, "sqeuclidean")
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = proj / orig
    both_zero = (orig == 0) & (proj == 0)
    ratios[both_zero] = 1.0
    ratios[(orig == 0) & (proj != 0)] = np.inf
    within = (ratios >= 1.0 - epsilon) & (ratios <= 1.0 + epsilon)
    return DistortionReport(
        epsilon=float(epsilon),
        fraction_within=float(within.mean()),
        max_ratio=float(ratios.max()),
        min_ratio=float(ratios.min()),
    )
