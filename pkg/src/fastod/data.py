"""Dataset containers, CSV ingestion, splitting, and synthetic data.

All operations are pure: a :class:`DataMatrix` is frozen after construction
and can be shared read-only across worker threads or processes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._validation import DataError, check_labels, check_matrix, check_seed


@dataclass(frozen=True)
class DataMatrix:
    """Dense n x d feature matrix with optional 0/1 outlier labels.

    Parameters
    ----------
    values : numpy.ndarray of shape (n, d)
        Finite float64 feature values.
    labels : numpy.ndarray of shape (n,), optional
        1 marks an outlier, 0 an inlier.
    feature_names : list of str, optional
        One name per feature column.
    """

    values: np.ndarray
    labels: np.ndarray | None = None
    feature_names: list[str] | None = field(default=None)

    def __post_init__(self):
        values = check_matrix(self.values, name="values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if self.labels is not None:
            labels = check_labels(self.labels, values.shape[0])
            labels.setflags(write=False)
            object.__setattr__(self, "labels", labels)
        if self.feature_names is not None:
            if len(self.feature_names) != values.shape[1]:
                raise DataError(
                    f"feature_names has {len(self.feature_names)} entries "
                    f"for {values.shape[1]} features"
                )
            object.__setattr__(self, "feature_names", list(self.feature_names))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def with_values(self, values: np.ndarray) -> "DataMatrix":
        """New matrix with replaced feature values, labels carried through."""
        return DataMatrix(values, labels=self.labels)

    def take(self, indices: np.ndarray) -> "DataMatrix":
        labels = None if self.labels is None else self.labels[indices]
        return DataMatrix(self.values[indices], labels=labels,
                          feature_names=self.feature_names)


@dataclass(frozen=True)
class SplitPair:
    """A train/test partition of one source matrix."""

    train: DataMatrix
    test: DataMatrix
    seed: int


@dataclass(frozen=True)
class FeatureStats:
    """Per-feature standardization statistics, computed on training data.

    Features whose sample std falls below ``1e-12`` are flagged degenerate
    and are only centered, never scaled.
    """

    mean: np.ndarray
    std: np.ndarray
    degenerate: np.ndarray

    def transform(self, values: np.ndarray) -> np.ndarray:
        values = check_matrix(values)
        if values.shape[1] != self.mean.shape[0]:
            raise DataError(
                f"matrix has {values.shape[1]} features, stats expect "
                f"{self.mean.shape[0]}"
            )
        scale = np.where(self.degenerate, 1.0, self.std)
        return (values - self.mean) / scale

    def transform_matrix(self, ds: DataMatrix) -> DataMatrix:
        return ds.with_values(self.transform(ds.values))


def load_csv(path, label_column: str | None = None) -> DataMatrix:
    """Read a headered CSV into a :class:`DataMatrix`.

    Parameters
    ----------
    path : str or pathlib.Path
        UTF-8 file, comma delimited, first row a header. Every non-label
        cell must parse as a finite real number.
    label_column : str, optional
        Header name of the 0/1 label column. When given, that column is
        extracted into ``labels``; otherwise all columns are features.

    Returns
    -------
    DataMatrix
        Row order preserved.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, header row required") from None
        header = [h.strip() for h in header]
        label_idx = None
        if label_column is not None:
            if label_column not in header:
                raise DataError(f"{path}: no column named {label_column!r}")
            label_idx = header.index(label_column)
        n_cols = len(header)
        rows: list[list[float]] = []
        labels: list[int] = []
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != n_cols:
                raise DataError(
                    f"{path}: row {row_no} has {len(row)} cells, expected {n_cols}"
                )
            features = []
            for col_idx, cell in enumerate(row):
                name = header[col_idx]
                try:
                    value = float(cell)
                except ValueError:
                    raise DataError(
                        f"{path}: row {row_no}, column {name!r}: "
                        f"cannot parse {cell.strip()!r} as a number"
                    ) from None
                if not np.isfinite(value):
                    raise DataError(
                        f"{path}: row {row_no}, column {name!r}: "
                        f"non-finite value {cell.strip()!r}"
                    )
                if col_idx == label_idx:
                    if value not in (0.0, 1.0):
                        raise DataError(
                            f"{path}: row {row_no}, column {name!r}: "
                            f"label must be 0 or 1, got {cell.strip()!r}"
                        )
                    labels.append(int(value))
                else:
                    features.append(value)
            rows.append(features)
    if not rows:
        raise DataError(f"{path}: no data rows")
    names = [h for i, h in enumerate(header) if i != label_idx]
    return DataMatrix(
        np.asarray(rows, dtype=np.float64),
        labels=np.asarray(labels, dtype=np.int64) if label_idx is not None else None,
        feature_names=names,
    )


def _class_train_counts(class_sizes: np.ndarray, n_train: int) -> np.ndarray:
    """Largest-remainder apportionment of ``n_train`` slots across classes."""
    exact = class_sizes * (n_train / class_sizes.sum())
    base = np.floor(exact).astype(np.int64)
    remainder = exact - base
    missing = n_train - int(base.sum())
    # ties on the remainder resolve toward the lower class id
    order = np.lexsort((np.arange(class_sizes.size), -remainder))
    for cls in order[:missing]:
        base[cls] += 1
    return base


def train_test_split(ds: DataMatrix, train_frac: float, seed: int) -> SplitPair:
    """Random split, stratified on the outlier labels when present.

    Parameters
    ----------
    ds : DataMatrix
    train_frac : float in (0, 1)
        Fraction of rows assigned to the training side. The training size
        is ``round(train_frac * n)``.
    seed : int
        Fixing (ds, train_frac, seed) fixes the partition.

    Returns
    -------
    SplitPair
        When labels are present each side's outlier rate matches the
        source within one sample per class.
    """
    seed = check_seed(seed)
    if not 0.0 < train_frac < 1.0:
        raise DataError(f"train_frac must be in (0, 1), got {train_frac}")
    rng = np.random.default_rng(seed)
    n_train = int(round(train_frac * ds.n))
    n_train = min(max(n_train, 1), ds.n - 1)
    if ds.labels is None:
        perm = rng.permutation(ds.n)
        train_idx, test_idx = perm[:n_train], perm[n_train:]
    else:
        classes = np.array([0, 1])
        sizes = np.array([(ds.labels == c).sum() for c in classes])
        if np.any(sizes < 2):
            raise DataError(
                "stratified split needs at least 2 members per class, "
                f"got inliers={sizes[0]}, outliers={sizes[1]}"
            )
        counts = _class_train_counts(sizes, n_train)
        train_parts, test_parts = [], []
        for cls, take in zip(classes, counts):
            members = np.flatnonzero(ds.labels == cls)
            members = members[rng.permutation(members.size)]
            train_parts.append(members[:take])
            test_parts.append(members[take:])
        train_idx = np.sort(np.concatenate(train_parts))
        test_idx = np.sort(np.concatenate(test_parts))
    return SplitPair(train=ds.take(train_idx), test=ds.take(test_idx), seed=seed)


def synth_blob(n_inliers: int, n_outliers: int, d: int, seed: int = 0) -> DataMatrix:
    """Synthetic labeled dataset: uniform inliers, normal-tailed outliers.

    Inliers are i.i.d. uniform on the box [-4, 4]^d; outliers are i.i.d.
    normal with mean 0 and std 4 per coordinate, so their tails land well
    outside the box while the bulk overlaps it. Inlier rows come first.

    Parameters
    ----------
    n_inliers, n_outliers : int
        Nonnegative counts; at least one must be positive.
    d : int
        Feature dimension, >= 1.
    seed : int

    Returns
    -------
    DataMatrix
        Labels set to 1 exactly on the outlier rows.
    """
    seed = check_seed(seed)
    if n_inliers < 0 or n_outliers < 0:
        raise DataError("counts must be nonnegative")
    if n_inliers + n_outliers == 0:
        raise DataError("at least one of n_inliers/n_outliers must be positive")
    if d < 1:
        raise DataError(f"d must be >= 1, got {d}")
    rng = np.random.default_rng(seed)
    inliers = rng.uniform(-4.0, 4.0, size=(n_inliers, d))
    outliers = rng.normal(0.0, 4.0, size=(n_outliers, d))
    values = np.vstack([inliers, outliers])
    labels = np.concatenate(
        [np.zeros(n_inliers, dtype=np.int64), np.ones(n_outliers, dtype=np.int64)]
    )
    return DataMatrix(values, labels=labels)


def standardize(ds: DataMatrix) -> tuple[DataMatrix, FeatureStats]:
    """Center each feature to mean 0 and scale to sample std 1.

    Features with sample std below 1e-12 are centered but left unscaled
    and flagged in the returned statistics.

    Parameters
    ----------
    ds : DataMatrix with n >= 2.

    Returns
    -------
    (DataMatrix, FeatureStats)
        The transformed matrix and the statistics to reuse on test data.
    """
    if ds.n < 2:
        raise DataError(f"standardize needs n >= 2, got n={ds.n}")
    mean = ds.values.mean(axis=0)
    std = ds.values.std(axis=0, ddof=1)
    degenerate = std < 1e-12
    stats = FeatureStats(mean=mean, std=std, degenerate=degenerate)
    return stats.transform_matrix(ds), stats
