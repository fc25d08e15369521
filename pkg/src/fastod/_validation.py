"""Lightweight input checks shared across the package."""

import numpy as np


class ConfigError(ValueError):
    """Invalid configuration, flags, or estimator parameters."""


class DataError(ValueError):
    """Malformed or inconsistent input data."""


def check_matrix(X, name="X", min_rows=1):
    """Coerce ``X`` to a 2-D float64 array and verify every entry is finite.

    Parameters
    ----------
    X : array-like of shape (n_samples, n_features)
    name : str
        Used in error messages.
    min_rows : int
        Minimum acceptable number of rows.

    Returns
    -------
    numpy.ndarray
        C-contiguous float64 copy of the input.
    """
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise DataError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if arr.shape[0] < min_rows:
        raise DataError(f"{name} needs at least {min_rows} rows, got {arr.shape[0]}")
    if arr.shape[1] < 1:
        raise DataError(f"{name} needs at least one feature column")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name} contains non-finite values")
    return np.ascontiguousarray(arr)


def check_vector(y, name="y", length=None):
    """Coerce ``y`` to a 1-D finite float64 array, optionally of fixed length."""
    arr = np.asarray(y, dtype=np.float64).ravel()
    if length is not None and arr.shape[0] != length:
        raise DataError(f"{name} has length {arr.shape[0]}, expected {length}")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name} contains non-finite values")
    return arr


def check_labels(labels, n, name="labels"):
    """Validate a 0/1 label sequence of length ``n``."""
    arr = np.asarray(labels)
    if arr.shape != (n,):
        raise DataError(f"{name} has shape {arr.shape}, expected ({n},)")
    values = np.unique(arr)
    if not np.all(np.isin(values, (0, 1))):
        raise DataError(f"{name} must contain only 0/1 entries, got {values}")
    return arr.astype(np.int64)


def check_seed(seed, name="seed"):
    if not isinstance(seed, (int, np.integer)):
        raise ConfigError(f"{name} must be an integer, got {type(seed).__name__}")
    return int(seed)
