"""Running-time forecasting for detector fits, and its conversion to ranks.

A regression forest maps (sample count, dimension, algorithm one-hot) to
a running-time forecast. Absolute accuracy matters little: the scheduler
consumes only the induced rank order, which survives any monotone error
in the forecasts and transfers across machines.
"""

from __future__ import annotations

import csv
import logging
import time
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from ._validation import ConfigError, DataError
from .data import DataMatrix
from .detectors import ALGORITHMS, make_estimator
from .forest import ForestParams, ForestRegressor
from .metrics import spearman

logger = logging.getLogger(__name__)

TIMING_HEADER = ("n", "d", "algo", "params_digest", "time_sum_10")


@dataclass(frozen=True)
class CostRecord:
    """One timing observation: summed wall-clock of repeated fits."""

    n: int
    d: int
    algo: str
    params_digest: str
    time_sum_10: float

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise DataError(f"need n, d >= 1, got n={self.n}, d={self.d}")
        if self.time_sum_10 <= 0:
            raise DataError(f"time_sum_10 must be positive, got {self.time_sum_10}")


@dataclass(frozen=True)
class FoldStats:
    fold: int
    n_records: int
    r2: float
    rho: float | None


@dataclass(frozen=True)
class CVReport:
    folds: list[FoldStats]

    @property
    def mean_r2(self) -> float:
        return float(np.mean([f.r2 for f in self.folds]))

    @property
    def mean_rho(self) -> float:
        rhos = [f.rho for f in self.folds if f.rho is not None]
        if not rhos:
            raise DataError("no fold produced a defined rank correlation")
        return float(np.mean(rhos))

    def as_dict(self) -> dict:
        return {
            "folds": [
                {"fold": f.fold, "n_records": f.n_records, "r2": f.r2,
                 "rho": f.rho}
                for f in self.folds
            ],
            "mean_r2": self.mean_r2,
            "mean_rho": self.mean_rho,
        }


@dataclass
class CostModel:
    """Fitted forecaster plus the one-hot layout it was trained with."""

    forest: ForestRegressor
    algo_vocabulary: list[str]
    target_transform: str = "log10"

    def __post_init__(self):
        if not self.algo_vocabulary:
            raise ConfigError("algo_vocabulary must be nonempty")
        if len(set(self.algo_vocabulary)) != len(self.algo_vocabulary):
            raise ConfigError("algo_vocabulary contains duplicates")
        if self.target_transform not in ("raw", "log10"):
            raise ConfigError(
                f"unknown target_transform {self.target_transform!r}"
            )

    def predict_seconds(self, pending) -> np.ndarray:
        """Forecast fit time for (spec, n, d) triples, in seconds."""
        X = np.vstack([
            featurize(n, d, spec.algo, self.algo_vocabulary)
            for spec, n, d in pending
        ])
        raw = self.forest.predict(X)
        if self.target_transform == "log10":
            return np.power(10.0, raw)
        return raw


def featurize(n: int, d: int, algo: str, vocabulary) -> np.ndarray:
    """Feature vector [n, d, one-hot(algo)] under a fixed vocabulary."""
    vocabulary = list(vocabulary)
    if algo not in vocabulary:
        raise ConfigError(f"algorithm {algo!r} not in vocabulary {vocabulary}")
    onehot = np.zeros(len(vocabulary))
    onehot[vocabulary.index(algo)] = 1.0
    return np.concatenate([[float(n), float(d)], onehot])


def collect_timings(specs, datasets, repeats: int = 10) -> list[CostRecord]:
    """Time every (spec, dataset) pair; strictly single-threaded.

    One untimed warm-up fit precedes measurement; the record stores the
    summed wall-clock of ``repeats`` further fits. A failing fit skips its
    record with a logged reason instead of aborting the batch.

    Parameters
    ----------
    specs : sequence of DetectorSpec
    datasets : sequence of DataMatrix
    repeats : int, default=10

    Returns
    -------
    list of CostRecord in (spec-major, dataset-minor) order.
    """
    if repeats < 1:
        raise ConfigError(f"repeats must be >= 1, got {repeats}")
    records = []
    for spec in specs:
        for ds in datasets:
            try:
                make_estimator(spec).fit(ds.values)  # warm-up, untimed
                total = 0.0
                for _ in range(repeats):
                    start = time.perf_counter()
                    make_estimator(spec).fit(ds.values)
                    total += time.perf_counter() - start
            except Exception as exc:
                logger.warning(
                    "skipping timing record for %s on n=%d d=%d: %s",
                    spec.algo, ds.n, ds.d, exc,
                )
                continue
            records.append(CostRecord(
                n=ds.n, d=ds.d, algo=spec.algo,
                params_digest=spec.digest(),
                time_sum_10=max(total, 1e-12),
            ))
    return records


def save_timings(records, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(TIMING_HEADER)
        for r in records:
            writer.writerow([r.n, r.d, r.algo, r.params_digest,
                             repr(r.time_sum_10)])


def load_timings(path) -> list[CostRecord]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != TIMING_HEADER:
            raise DataError(
                f"{path}: expected header {','.join(TIMING_HEADER)}"
            )
        for row in reader:
            records.append(CostRecord(
                n=int(row["n"]), d=int(row["d"]), algo=row["algo"],
                params_digest=row["params_digest"],
                time_sum_10=float(row["time_sum_10"]),
            ))
    return records


def _fold_ids(n_records: int, n_folds: int) -> np.ndarray:
    # round-robin keeps every fold mixed across the spec-major record order
    return np.arange(n_records) % n_folds


def train_cost_model(records, params: ForestParams | None = None,
                     n_folds: int = 10,
                     target_transform: str = "log10") -> tuple[CostModel, CVReport]:
    """Fit the forecaster with k-fold cross-validated quality estimates.

    Parameters
    ----------
    records : sequence of CostRecord, at least 20 spanning >= 2 algorithms
        (a single-algorithm corpus is allowed but warned about).
    params : ForestParams, optional
        An unset mtry defaults to the full featurized width here (plain
        bagging): every split must be able to see the one-hot block, or
        algorithm-separable targets would not be fit exactly.
    n_folds : int, default=10
        Capped so every fold keeps at least 3 records.
    target_transform : {"log10", "raw"}
        Fit targets; timings span orders of magnitude so log10 is the
        default. Rank forecasts are unaffected by any monotone transform.

    Returns
    -------
    (CostModel, CVReport)
        The model is refit on all records after cross-validation; the
        report carries per-fold held-out R^2 and Spearman rho.
    """
    records = list(records)
    if len(records) < 20:
        raise DataError(f"need at least 20 timing records, got {len(records)}")
    vocabulary = sorted({r.algo for r in records})
    for algo in vocabulary:
        if algo not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm in records: {algo!r}")
    if len(vocabulary) < 2:
        warnings.warn("timing corpus covers a single algorithm; the one-hot "
                      "block is degenerate", stacklevel=2)
    if params is None:
        params = ForestParams()
    if params.mtry is None:
        params = replace(params, mtry=2 + len(vocabulary))
    X = np.vstack([featurize(r.n, r.d, r.algo, vocabulary) for r in records])
    y = np.array([r.time_sum_10 for r in records])
    if target_transform == "log10":
        y = np.log10(y)
    elif target_transform != "raw":
        raise ConfigError(f"unknown target_transform {target_transform!r}")

    n_folds = max(2, min(n_folds, len(records) // 3))
    ids = _fold_ids(len(records), n_folds)
    folds = []
    for fold in range(n_folds):
        held = ids == fold
        forest = params.make_estimator().fit(X[~held], y[~held])
        pred = forest.predict(X[held])
        actual = y[held]
        sse = float(((pred - actual) ** 2).sum())
        sst = float(((actual - actual.mean()) ** 2).sum())
        r2 = 1.0 - sse / sst if sst > 0 else 0.0
        try:
            rho = spearman(pred, actual)
        except DataError:
            rho = None
        folds.append(FoldStats(fold=fold, n_records=int(held.sum()),
                               r2=r2, rho=rho))
    final = params.make_estimator().fit(X, y)
    model = CostModel(forest=final, algo_vocabulary=vocabulary,
                      target_transform=target_transform)
    return model, CVReport(folds=folds)


def ranks_from_predictions(predictions) -> np.ndarray:
    """Convert forecasts to a permutation of 1..m, ascending by value.

    Equal forecasts keep their list order (stable tie-break).
    """
    predictions = np.asarray(predictions, dtype=np.float64)
    order = np.argsort(predictions, kind="stable")
    ranks = np.empty(predictions.size, dtype=np.int64)
    ranks[order] = np.arange(1, predictions.size + 1)
    return ranks


def forecast_ranks(model: CostModel, pending) -> np.ndarray:
    """Rank pending (spec, n, d) tasks by forecast fit time, 1 = cheapest."""
    pending = list(pending)
    if not pending:
        raise DataError("pending task list is empty")
    return ranks_from_predictions(model.predict_seconds(pending))


def make_timing_datasets(sizes, seed: int = 0) -> list[DataMatrix]:
    """Synthetic unlabeled matrices for timing collection.

    Parameters
    ----------
    sizes : sequence of (n, d) pairs
    seed : int
    """
    rng = np.random.default_rng(seed)
    out = []
    for n, d in sizes:
        out.append(DataMatrix(rng.standard_normal((n, d))))
    return out
