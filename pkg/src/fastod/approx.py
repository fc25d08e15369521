"""Distill fitted unsupervised detectors into regression forests.

A fitted detector's own training scores serve as regression targets
("pseudo ground truth"); a forest trained on the ORIGINAL feature space
against those targets then replaces the detector for prediction on
unseen rows. This buys prediction speed for neighbor-based detectors,
whose per-point prediction cost scales with the training set, while the
forest's cost scales only with tree count and depth.

Only expensive detectors are worth replacing: histogram and
isolation-tree detectors already predict cheaply and are scored natively
by default (overridable per detector).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import DataError, check_matrix
from .data import DataMatrix
from .detectors import DetectorSpec, FittedDetector
from .forest import ForestParams, ForestRegressor
from .projection import ProjectionPlan

# detectors whose native prediction is slow enough to justify a stand-in
DEFAULT_APPROXIMATE = {
    "knn": True,
    "aknn": True,
    "lof": True,
    "fastabod": True,
    "featurebagging": True,
    "hbos": False,
    "iforest": False,
}


@dataclass
class Approximator:
    """Forest stand-in for one fitted detector, living in original space."""

    spec: DetectorSpec
    plan: ProjectionPlan
    forest: ForestRegressor
    trained_on_original_space: bool = True

    def predict(self, X) -> np.ndarray:
        """Score rows of the raw (standardized) feature space.

        No projection is applied: the approximator owns the original
        space even when its source detector was trained on a subspace.
        """
        values = X.values if isinstance(X, DataMatrix) else check_matrix(X)
        return self.forest.predict(values)


def pseudo_targets(fd: FittedDetector) -> np.ndarray:
    """The detector's outlier scores on its own training subspace."""
    return np.array(fd.train_scores, copy=True)


def approximate(fd: FittedDetector, X_original: DataMatrix,
                params: ForestParams | None = None) -> Approximator:
    """Fit the forest stand-in for one fitted detector.

    Parameters
    ----------
    fd : FittedDetector
    X_original : DataMatrix
        The un-projected training matrix; row count must match the
        detector's training scores.
    params : ForestParams, optional
        Forest hyperparameters (fixing params.seed fixes the forest).
    """
    targets = pseudo_targets(fd)
    if X_original.n != targets.shape[0]:
        raise DataError(
            f"training matrix has {X_original.n} rows but the detector was "
            f"fit on {targets.shape[0]}"
        )
    if params is None:
        params = ForestParams()
    forest = params.make_estimator().fit(X_original.values, targets)
    return Approximator(spec=fd.spec, plan=fd.plan, forest=forest)


def predict_approx(approximator: Approximator, X_test) -> np.ndarray:
    return approximator.predict(X_test)


def should_approximate(spec: DetectorSpec, overrides: dict | None = None) -> bool:
    """Whether a detector is worth replacing for prediction.

    ``overrides`` maps algorithm names to booleans and wins over the
    default policy; a per-spec "approximate" entry in the detector's
    params wins over both.
    """
    if "approximate" in spec.params:
        return bool(spec.params["approximate"])
    if overrides and spec.algo in overrides:
        return bool(overrides[spec.algo])
    return DEFAULT_APPROXIMATE[spec.algo]


def surface_grid(fd: FittedDetector, approximator: Approximator,
                 X: DataMatrix, resolution: int = 50,
                 margin: float = 0.5) -> np.ndarray:
    """Evaluate source and stand-in over a 2-D grid for external plotting.

    Returns an array with rows (x, y, source_score, approx_score) over a
    resolution x resolution grid spanning the data range plus a relative
    margin. Only defined for 2-D original feature spaces.
    """
    if X.d != 2:
        raise DataError(f"decision-surface grids need d=2 data, got d={X.d}")
    if resolution < 2:
        raise DataError(f"resolution must be >= 2, got {resolution}")
    lo = X.values.min(axis=0)
    hi = X.values.max(axis=0)
    pad = (hi - lo) * margin
    xs = np.linspace(lo[0] - pad[0], hi[0] + pad[0], resolution)
    ys = np.linspace(lo[1] - pad[1], hi[1] + pad[1], resolution)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    grid = np.column_stack([gx.ravel(), gy.ravel()])
    source = fd.score(grid)
    stand_in = approximator.predict(grid)
    return np.column_stack([grid, source, stand_in])
