"""End-to-end pipelines: ensemble fitting, prediction, and benchmarking.

The fit pipeline realizes, per ensemble member i: decide the target
dimension, draw a member-specific subspace plan (seed = master_seed + i),
project, and fit, with all fit tasks dispatched through the configured
scheduler. Prediction routes unseen rows through each member's stored
plan, or through its forest stand-in when approximation is on.
"""

from __future__ import annotations

import functools
import logging
import math
import os
import time
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import bundle as bundle_io
from ._validation import ConfigError, DataError
from .approx import Approximator, approximate, should_approximate
from .costmodel import (CostModel, forecast_ranks, load_timings,
                        train_cost_model)
from .data import DataMatrix, standardize, train_test_split
from .detectors import DetectorSpec, FittedDetector, fit_detector
from .forest import ForestParams
from .metrics import evaluate
from .projection import METHODS, ProjectionPlan, apply_plan, decide_k, make_plan
from .scheduler import execute, plan_bps, plan_simple

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ProjectionConfig:
    method: str = "toeplitz"
    theta: int = 20
    k: int | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown projection method {self.method!r}")
        if self.theta < 1:
            raise ConfigError(f"theta must be >= 1, got {self.theta}")
        if self.k is not None and self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")


@dataclass(frozen=True)
class SchedulerConfig:
    policy: str = "bps"
    workers: int | None = None
    backend: str = "process"

    def __post_init__(self):
        if self.policy not in ("bps", "simple"):
            raise ConfigError(f"scheduler policy must be bps or simple, "
                              f"got {self.policy!r}")
        if self.workers is not None and self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")

    def effective_workers(self, m: int) -> int:
        t = self.workers if self.workers is not None else (os.cpu_count() or 1)
        return max(1, min(t, m))


@dataclass(frozen=True)
class ApproxConfig:
    enabled: bool = True
    overrides: dict = field(default_factory=dict)
    forest: ForestParams = field(default_factory=ForestParams)


@dataclass(frozen=True)
class PipelineConfig:
    detectors: tuple[DetectorSpec, ...]
    projection: ProjectionConfig = ProjectionConfig()
    scheduler: SchedulerConfig = SchedulerConfig()
    approximation: ApproxConfig = ApproxConfig()
    master_seed: int = 42
    standardize: bool = True

    def __post_init__(self):
        if not self.detectors:
            raise ConfigError("detector list must be nonempty")

    def seeded_detectors(self) -> list[DetectorSpec]:
        """Specs with per-member seeds derived from the master seed."""
        out = []
        for i, spec in enumerate(self.detectors):
            out.append(replace(spec, seed=self.master_seed + i)
                       if spec.seed == 0 else spec)
        return out


def default_detectors() -> tuple[DetectorSpec, ...]:
    return (
        DetectorSpec("knn", {"n_neighbors": 10}),
        DetectorSpec("aknn", {"n_neighbors": 10}),
        DetectorSpec("lof", {"n_neighbors": 10}),
        DetectorSpec("hbos", {}),
        DetectorSpec("iforest", {}),
    )


def config_from_dict(raw: dict) -> PipelineConfig:
    """Parse the JSON configuration document."""
    known = {"detectors", "projection", "scheduler", "approximation",
             "master_seed", "standardize"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    detectors = []
    for i, entry in enumerate(raw.get("detectors", [])):
        if "algo" not in entry:
            raise ConfigError(f"detector entry {i} is missing 'algo'")
        detectors.append(DetectorSpec(
            algo=entry["algo"],
            params=entry.get("params", {}),
            seed=entry.get("seed", 0),
        ))
    proj_raw = dict(raw.get("projection", {}))
    sched_raw = dict(raw.get("scheduler", {}))
    appr_raw = dict(raw.get("approximation", {}))
    forest_raw = dict(appr_raw.get("forest", {}))
    try:
        projection = ProjectionConfig(
            method=proj_raw.get("method", "toeplitz"),
            theta=proj_raw.get("theta", 20),
            k=proj_raw.get("k"),
        )
        scheduler = SchedulerConfig(
            policy=sched_raw.get("policy", "bps"),
            workers=sched_raw.get("workers"),
            backend=sched_raw.get("backend", "process"),
        )
        approximation = ApproxConfig(
            enabled=appr_raw.get("enabled", True),
            overrides=dict(appr_raw.get("overrides", {})),
            forest=ForestParams(
                n_trees=forest_raw.get("n_trees", 100),
                max_depth=forest_raw.get("max_depth"),
                min_samples_leaf=forest_raw.get("min_samples_leaf", 2),
                mtry=forest_raw.get("mtry"),
                seed=forest_raw.get("seed", 0),
                bootstrap=forest_raw.get("bootstrap", True),
            ),
        )
        return PipelineConfig(
            detectors=tuple(detectors) or default_detectors(),
            projection=projection,
            scheduler=scheduler,
            approximation=approximation,
            master_seed=raw.get("master_seed", 42),
            standardize=raw.get("standardize", True),
        )
    except TypeError as exc:
        raise ConfigError(f"malformed config: {exc}") from None


def config_to_dict(config: PipelineConfig) -> dict:
    return {
        "detectors": [
            {"algo": s.algo, "params": s.params, "seed": s.seed}
            for s in config.detectors
        ],
        "projection": {
            "method": config.projection.method,
            "theta": config.projection.theta,
            "k": config.projection.k,
        },
        "scheduler": {
            "policy": config.scheduler.policy,
            "workers": config.scheduler.workers,
            "backend": config.scheduler.backend,
        },
        "approximation": {
            "enabled": config.approximation.enabled,
            "overrides": config.approximation.overrides,
            "forest": bundle_io._forest_params_dict(config.approximation.forest),
        },
        "master_seed": config.master_seed,
        "standardize": config.standardize,
    }


@functools.lru_cache(maxsize=1)
def default_cost_model() -> CostModel:
    """Cost model trained on the packaged synthetic timing corpus.

    A stand-in for a machine-specific model; retrain with the ``cost``
    subcommands for forecasts calibrated to your own hardware.
    """
    with resources.as_file(
        resources.files("fastod.resources") / "default_timings.csv"
    ) as path:
        records = load_timings(path)
    model, _ = train_cost_model(records, ForestParams(seed=7))
    return model


def member_plan(config: PipelineConfig, d: int, index: int,
                X_train: np.ndarray | None = None) -> ProjectionPlan:
    """Subspace plan for member ``index`` under the projection rule."""
    method = config.projection.method
    seed = config.master_seed + index
    if method == "none":
        return make_plan("none", d, d, seed)
    k = config.projection.k
    if k is None:
        k = decide_k(d, config.projection.theta)
    if k is None:  # dimension at or below the threshold: no projection
        return make_plan("none", d, d, seed)
    return make_plan(method, d, min(k, d), seed, X=X_train)


def _fit_task(spec: DetectorSpec, plan: ProjectionPlan,
              X_sub: DataMatrix) -> FittedDetector:
    return fit_detector(spec, X_sub, plan)


@dataclass
class FitReport:
    bundle_path: Path
    fitted: int
    failures: list[tuple[int, str]]
    wall_seconds: float


def fit_ensemble(config: PipelineConfig, ds: DataMatrix,
                 out_bundle, cost_model: CostModel | None = None) -> FitReport:
    """Fit the configured ensemble and persist it as a bundle.

    Per-member failures are captured and reported; surviving members are
    still persisted. Raises only when every member fails.
    """
    start = time.perf_counter()
    if config.standardize:
        ds_std, stats = standardize(ds)
    else:
        ds_std, stats = ds, None
    specs = config.seeded_detectors()
    m = len(specs)
    plans = [member_plan(config, ds_std.d, i, X_train=ds_std.values)
             for i in range(m)]
    projected = {i: apply_plan(plan, ds_std) for i, plan in enumerate(plans)}

    t = config.scheduler.effective_workers(m)
    if config.scheduler.policy == "bps":
        model = cost_model if cost_model is not None else default_cost_model()
        ranks = forecast_ranks(
            model, [(spec, ds_std.n, plans[i].k)
                    for i, spec in enumerate(specs)],
        )
        plan = plan_bps(ranks, t)
    else:
        plan = plan_simple(m, t)

    tasks = [functools.partial(_fit_task, specs[i], plans[i], projected[i])
             for i in range(m)]
    outcome = execute(plan, tasks, backend=config.scheduler.backend)
    for index, reason in outcome.failures:
        logger.warning("detector %d (%s) failed: %s",
                       index, specs[index].algo, reason)
    fitted = [(i, fd) for i, fd in enumerate(outcome.results) if fd is not None]
    if not fitted:
        raise DataError("every detector failed to fit; nothing to persist")
    bundle_io.save_ensemble(
        out_bundle,
        config=config_to_dict(config),
        stats=stats,
        train=DataMatrix(ds_std.values),
        detectors=[fd for _, fd in fitted],
        indices=[i for i, _ in fitted],
    )
    return FitReport(
        bundle_path=Path(out_bundle),
        fitted=len(fitted),
        failures=outcome.failures,
        wall_seconds=time.perf_counter() - start,
    )


def _approx_task(fd: FittedDetector, train: DataMatrix,
                 params: ForestParams) -> Approximator:
    return approximate(fd, train, params)


def _missing_approximators(bundle: bundle_io.EnsembleBundle,
                           config: PipelineConfig,
                           workers: int) -> dict[int, Approximator]:
    pending = []
    for idx, fd in zip(bundle.indices, bundle.detectors):
        if idx in bundle.approximators:
            continue
        if should_approximate(fd.spec, config.approximation.overrides):
            pending.append((idx, fd))
    if not pending:
        return {}
    base = config.approximation.forest
    tasks = [
        functools.partial(_approx_task, fd, bundle.train,
                          replace(base, seed=base.seed + idx))
        for idx, fd in pending
    ]
    plan = plan_simple(len(tasks), max(1, min(workers, len(tasks))))
    outcome = execute(plan, tasks, backend="thread")
    if outcome.failures:
        first = outcome.failures[0]
        raise DataError(f"approximator fit failed for detector "
                        f"{pending[first[0]][0]}: {first[1]}")
    return {pending[j][0]: approx for j, approx in enumerate(outcome.results)}


@dataclass
class PredictReport:
    out_csv: Path
    columns: list[str]
    n_rows: int
    approximated: list[int]


def predict_scores(bundle_path, test: DataMatrix, out_csv,
                   use_approx: bool = False,
                   workers: int | None = None) -> PredictReport:
    """Score unseen rows with every bundled detector, one CSV column each.

    With ``use_approx`` on, detectors flagged as worth replacing are
    scored by their forest stand-ins, which are fitted (and written back
    into the bundle) on first use; everything else scores natively.
    """
    bundle = bundle_io.load_ensemble(bundle_path)
    config = config_from_dict(bundle.config) if bundle.config else None
    original_d = bundle.train.d
    if test.d != original_d:
        raise DataError(
            f"test data has d={test.d}, bundle expects d={original_d}"
        )
    X = bundle.stats.transform(test.values) if bundle.stats else test.values

    approximated: list[int] = []
    approximators: dict[int, Approximator] = dict(bundle.approximators)
    if use_approx:
        if config is None:
            raise ConfigError("bundle carries no config; cannot decide "
                              "which detectors to approximate")
        t = workers if workers is not None else \
            config.scheduler.effective_workers(len(bundle.detectors))
        fresh = _missing_approximators(bundle, config, t)
        if fresh:
            bundle_io.add_approximators(bundle_path, fresh)
            approximators.update(fresh)

    columns = ["row"]
    score_columns = []
    for idx, fd in zip(bundle.indices, bundle.detectors):
        name = f"det{idx:03d}_{fd.spec.algo}"
        use_standin = (
            use_approx and idx in approximators
            and should_approximate(fd.spec, config.approximation.overrides)
        )
        if use_standin:
            scores = approximators[idx].predict(X)
            approximated.append(idx)
        else:
            scores = fd.score(X)
        columns.append(name)
        score_columns.append(scores)

    out_csv = Path(out_csv)
    with open(out_csv, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(columns) + "\n")
        for r in range(test.n):
            cells = [str(r)] + [repr(float(col[r])) for col in score_columns]
            fh.write(",".join(cells) + "\n")
    return PredictReport(out_csv=out_csv, columns=columns, n_rows=test.n,
                         approximated=approximated)


# ---------------------------------------------------------------------------
# benchmark harness
# ---------------------------------------------------------------------------

BENCH_HEADER = ("dataset", "detector", "variant", "roc", "p_at_n",
                "fit_seconds", "predict_seconds")
SCHED_HEADER = ("dataset", "m", "t", "simple_seconds", "bps_seconds",
                "pct_reduction")


def bench_detectors() -> tuple[DetectorSpec, ...]:
    """The expensive proximity trio used for the projection sweep."""
    return (
        DetectorSpec("knn", {"n_neighbors": 10}),
        DetectorSpec("lof", {"n_neighbors": 10}),
        DetectorSpec("fastabod", {"n_neighbors": 10}),
    )


def bench_family(m: int) -> list[DetectorSpec]:
    """m heterogeneous specs grouped by algorithm, parameters varying.

    Grouped (not interleaved) ordering reproduces the worst case for
    contiguous scheduling: a worker ends up with a block of same-type,
    same-cost-profile models.
    """
    algos = ("knn", "lof", "aknn", "hbos", "iforest")
    per = max(1, m // len(algos))
    specs: list[DetectorSpec] = []
    neighbor_grid = (5, 10, 15, 20, 25, 30, 40, 50)
    for algo in algos:
        take = per if algo != algos[-1] else m - len(specs)
        for j in range(take):
            if algo in ("knn", "lof", "aknn"):
                params = {"n_neighbors": neighbor_grid[j % len(neighbor_grid)]}
            elif algo == "iforest":
                params = {"n_trees": 50 + 25 * (j % 3)}
            else:
                params = {}
            specs.append(DetectorSpec(algo, params))
    return specs[:m]


def _timed_fit_score(spec, plan, train_sub, eval_values):
    t0 = time.perf_counter()
    fd = fit_detector(spec, train_sub, plan)
    fit_s = time.perf_counter() - t0
    t0 = time.perf_counter()
    scores = fd.estimator.decision_function(plan.transform(eval_values))
    predict_s = time.perf_counter() - t0
    return fd, scores, fit_s, predict_s


def bench_projection(ds: DataMatrix, name: str, specs, trials: int,
                     master_seed: int) -> list[dict]:
    """Sweep every projection variant over the given detectors.

    The half-dimension rule is forced for every non-identity variant so
    the sweep stays informative on low-dimensional data.
    """
    if ds.labels is None:
        raise DataError(f"dataset {name} has no labels; the benchmark "
                        "needs them")
    ds_std, _ = standardize(ds)
    k = max(1, math.ceil(ds_std.d / 2))
    rows = []
    for method in METHODS:
        for spec in specs:
            rocs, pns, fits, preds = [], [], [], []
            for trial in range(trials):
                seed = master_seed + 1000 * trial
                if method == "none":
                    plan = make_plan("none", ds_std.d, ds_std.d, seed)
                else:
                    plan = make_plan(method, ds_std.d, k, seed,
                                     X=ds_std.values)
                sub = apply_plan(plan, ds_std)
                trial_spec = replace(spec, seed=seed)
                _, scores, fit_s, predict_s = _timed_fit_score(
                    trial_spec, plan, sub, ds_std.values)
                result = evaluate(ds_std.labels, scores)
                rocs.append(result.roc_auc)
                pns.append(result.p_at_n)
                fits.append(fit_s)
                preds.append(predict_s)
            rows.append({
                "dataset": name, "detector": spec.algo, "variant": method,
                "roc": float(np.mean(rocs)), "p_at_n": float(np.mean(pns)),
                "fit_seconds": float(np.mean(fits)),
                "predict_seconds": float(np.mean(preds)),
            })
    return rows


def bench_scheduler(ds: DataMatrix, name: str, m_values, t_values,
                    master_seed: int,
                    cost_model: CostModel | None = None,
                    backend: str = "process") -> list[dict]:
    """Wall-clock of contiguous-chunk vs balanced scheduling on real fits."""
    ds_std, _ = standardize(ds)
    model = cost_model if cost_model is not None else default_cost_model()
    rows = []
    for m in m_values:
        specs = [replace(s, seed=master_seed + i)
                 for i, s in enumerate(bench_family(m))]
        identity = make_plan("none", ds_std.d, ds_std.d, master_seed)
        tasks = [functools.partial(_fit_task, spec, identity, ds_std)
                 for spec in specs]
        ranks = forecast_ranks(model, [(s, ds_std.n, ds_std.d) for s in specs])
        for t in t_values:
            t0 = time.perf_counter()
            with_simple = execute(plan_simple(m, t), tasks, backend=backend)
            simple_s = time.perf_counter() - t0
            t0 = time.perf_counter()
            with_bps = execute(plan_bps(ranks, t), tasks, backend=backend)
            bps_s = time.perf_counter() - t0
            if with_simple.failures or with_bps.failures:
                raise DataError(f"benchmark fits failed on {name}")
            rows.append({
                "dataset": name, "m": m, "t": t,
                "simple_seconds": simple_s, "bps_seconds": bps_s,
                "pct_reduction": 100.0 * (simple_s - bps_s) / simple_s,
            })
    return rows


def bench_approximation(ds: DataMatrix, name: str, specs, trials: int,
                        master_seed: int,
                        forest: ForestParams | None = None) -> list[dict]:
    """Original vs stand-in quality on held-out data, averaged over trials."""
    if ds.labels is None:
        raise DataError(f"dataset {name} has no labels; the benchmark "
                        "needs them")
    forest = forest or ForestParams()
    by_variant: dict[tuple[str, str], list] = {}
    for trial in range(trials):
        seed = master_seed + 1000 * trial
        pair = train_test_split(ds, 0.6, seed)
        train_std, stats = standardize(pair.train)
        X_test = stats.transform(pair.test.values)
        for j, spec in enumerate(specs):
            trial_spec = replace(spec, seed=seed + j)
            plan_cfg = PipelineConfig(detectors=(trial_spec,),
                                      master_seed=seed + j)
            plan = member_plan(plan_cfg, train_std.d, 0,
                               X_train=train_std.values)
            sub = apply_plan(plan, train_std)
            fd = fit_detector(trial_spec, sub, plan)
            native = fd.score(X_test)
            stand_in = approximate(
                fd, train_std, replace(forest, seed=seed + j)
            ).predict(X_test)
            for variant, scores in (("orig", native), ("appr", stand_in)):
                result = evaluate(pair.test.labels, scores)
                by_variant.setdefault((spec.algo, variant), []).append(
                    (result.roc_auc, result.p_at_n)
                )
    rows = []
    for (algo, variant), values in sorted(by_variant.items()):
        arr = np.asarray(values)
        rows.append({
            "dataset": name, "detector": algo, "variant": variant,
            "roc": float(arr[:, 0].mean()), "p_at_n": float(arr[:, 1].mean()),
            "fit_seconds": "", "predict_seconds": "",
        })
    return rows
