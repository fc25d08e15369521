"""Balanced task partitioning across workers, plus the parallel executor.

The balanced policy targets per-worker rank sums near (m^2 + m) / (2t),
minimizing the sum-of-deviations imbalance this module measures. Tiny
instances (at most a few thousand possible assignments) are solved
exactly by bounded enumeration; larger ones use the standard
longest-processing-time greedy: walk the tasks by descending predicted
rank and give each to the worker with the smallest rank sum so far. The
naive baseline (contiguous equal-count chunks in task order) is what
generic ensemble frameworks do, and is what the balanced policy is
benchmarked against.

Scheduling never changes results, only timing: the executor reorders
worker outputs back to task-index order, so any plan and any worker
count produce identical values for pure tasks.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._validation import ConfigError, DataError

BACKENDS = ("serial", "thread", "process")

# exact-search cap: number of enumerable assignments (t ** m)
EXACT_SEARCH_LIMIT = 8192


@dataclass(frozen=True)
class SchedulePlan:
    """An exact partition of task indices 0..m-1 across t workers.

    Idle workers are legal (the contiguous-chunk baseline produces them
    whenever the ceiling chunk size covers m early); balanced plans only
    leave a worker idle when m < t.
    """

    assignments: list[list[int]]
    m: int
    t: int
    ranks: np.ndarray | None = None

    def __post_init__(self):
        if self.t < 1 or len(self.assignments) != self.t:
            raise ConfigError(
                f"need one task list per worker, got {len(self.assignments)} "
                f"for t={self.t}"
            )
        flat = [i for group in self.assignments for i in group]
        if sorted(flat) != list(range(self.m)):
            raise ConfigError("assignments must partition 0..m-1 exactly")

    def rank_sums(self) -> np.ndarray:
        if self.ranks is None:
            raise DataError("plan carries no ranks")
        return np.array([
            sum(self.ranks[i] for i in group) for group in self.assignments
        ], dtype=np.float64)


def _check_ranks(ranks) -> np.ndarray:
    ranks = np.asarray(ranks)
    m = ranks.size
    if m < 1 or sorted(ranks.tolist()) != list(range(1, m + 1)):
        raise DataError(f"ranks must be a permutation of 1..{max(m, 1)}")
    return ranks.astype(np.int64)


def _plan_lpt(ranks: np.ndarray, t: int) -> list[list[int]]:
    """Longest-processing-time greedy: descending rank, least-loaded worker."""
    order = np.argsort(-ranks, kind="stable")
    sums = np.zeros(t)
    groups: list[list[int]] = [[] for _ in range(t)]
    for task in order:
        worker = int(np.argmin(sums))  # ties resolve to the lowest index
        groups[worker].append(int(task))
        sums[worker] += ranks[task]
    return groups


def _plan_exact(ranks: np.ndarray, t: int) -> list[list[int]]:
    """Enumerate every assignment; minimize (imbalance, makespan, order).

    Works in integers scaled by t so comparisons are exact; assignments
    leaving a worker idle are skipped whenever m >= t.
    """
    m = ranks.size
    total = int(ranks.sum())
    loads = [int(r) for r in ranks]
    best_key = None
    best_assign = None
    for assign in itertools.product(range(t), repeat=m):
        if m >= t and len(set(assign)) < t:
            continue
        sums = [0] * t
        for task in range(m):
            sums[assign[task]] += loads[task]
        objective = sum(abs(t * s - total) for s in sums)
        key = (objective, max(sums))
        if best_key is None or key < best_key:
            best_key = key
            best_assign = assign
    groups: list[list[int]] = [[] for _ in range(t)]
    for task, worker in enumerate(best_assign):
        groups[worker].append(task)
    # present workers in descending-load order, mirroring the greedy's shape
    groups.sort(key=lambda g: -sum(loads[i] for i in g))
    return groups


def plan_bps(ranks, t: int) -> SchedulePlan:
    """Balanced plan from predicted ranks.

    Minimizes the imbalance objective exactly when the assignment space
    t**m is small enough to enumerate (see EXACT_SEARCH_LIMIT), and falls
    back to the longest-processing-time greedy beyond that.

    Parameters
    ----------
    ranks : sequence of int
        A permutation of 1..m; ranks[i] is task i's predicted-cost rank.
    t : int
        Worker count, >= 1.

    Returns
    -------
    SchedulePlan
        Each worker's rank sum lies within max(ranks) of the ideal
        (m^2 + m) / (2t).
    """
    ranks = _check_ranks(ranks)
    if t < 1:
        raise ConfigError(f"t must be >= 1, got {t}")
    if t ** ranks.size <= EXACT_SEARCH_LIMIT:
        groups = _plan_exact(ranks, t)
    else:
        groups = _plan_lpt(ranks, t)
    return SchedulePlan(assignments=groups, m=ranks.size, t=t, ranks=ranks)


def plan_simple(m: int, t: int, ranks=None) -> SchedulePlan:
    """Contiguous equal-count chunks in task order (the naive baseline)."""
    if m < 1 or t < 1:
        raise ConfigError(f"need m, t >= 1, got m={m}, t={t}")
    chunk = math.ceil(m / t)
    groups = [list(range(start, min(start + chunk, m)))
              for start in range(0, chunk * t, chunk)]
    groups = [g for g in groups][:t]
    while len(groups) < t:
        groups.append([])
    return SchedulePlan(
        assignments=groups, m=m, t=t,
        ranks=None if ranks is None else _check_ranks(ranks),
    )


def imbalance(plan: SchedulePlan, loads) -> float:
    """Sum over workers of |worker load - mean worker load|.

    Zero exactly when the load is perfectly balanced.
    """
    loads = np.asarray(loads, dtype=np.float64)
    if loads.size != plan.m:
        raise DataError(f"got {loads.size} loads for m={plan.m} tasks")
    if np.any(loads < 0):
        raise DataError("loads must be nonnegative")
    target = loads.sum() / plan.t
    total = 0.0
    for group in plan.assignments:
        total += abs(sum(loads[i] for i in group) - target)
    return float(total)


def makespan(plan: SchedulePlan, loads) -> float:
    """Load of the slowest worker; what imbalance actually costs."""
    loads = np.asarray(loads, dtype=np.float64)
    if loads.size != plan.m:
        raise DataError(f"got {loads.size} loads for m={plan.m} tasks")
    return float(max(sum(loads[i] for i in group) if group else 0.0
                     for group in plan.assignments))


@dataclass
class ExecutionResult:
    """Per-task outputs in task-index order, plus captured failures."""

    results: list
    failures: list[tuple[int, str]]

    @property
    def ok(self) -> bool:
        return not self.failures


def _run_sublist(tasks, indices):
    out = []
    for i in indices:
        try:
            out.append((i, True, tasks[i]()))
        except Exception as exc:  # captured per task, siblings continue
            out.append((i, False, f"{type(exc).__name__}: {exc}"))
    return out


def _run_sublist_packed(packed):
    # process backend entry point: (sublist of callables, their indices)
    sub_tasks, indices = packed
    out = []
    for i, task in zip(indices, sub_tasks):
        try:
            out.append((i, True, task()))
        except Exception as exc:
            out.append((i, False, f"{type(exc).__name__}: {exc}"))
    return out


def execute(plan: SchedulePlan, tasks, backend: str = "thread") -> ExecutionResult:
    """Run independent zero-argument tasks under a schedule plan.

    Each worker owns its assigned sublist and processes it sequentially;
    workers run concurrently. Outputs are reordered to task-index order.
    A task failure is captured as (index, reason) and never aborts
    sibling workers; failed slots hold None in ``results``.

    Parameters
    ----------
    plan : SchedulePlan
    tasks : sequence of callables, len(tasks) == plan.m
        Must be self-contained (immutable inputs, per-task seeds). The
        "process" backend additionally requires them picklable.
    backend : {"thread", "process", "serial"}
    """
    tasks = list(tasks)
    if len(tasks) != plan.m:
        raise DataError(f"got {len(tasks)} tasks for a plan over m={plan.m}")
    if backend not in BACKENDS:
        raise ConfigError(f"unknown backend {backend!r}")

    groups = [g for g in plan.assignments if g]
    if backend == "serial" or plan.t == 1 or len(groups) <= 1:
        chunks = [_run_sublist(tasks, g) for g in groups]
    elif backend == "thread":
        with ThreadPoolExecutor(max_workers=len(groups)) as pool:
            chunks = list(pool.map(lambda g: _run_sublist(tasks, g), groups))
    else:
        payload = [([tasks[i] for i in g], g) for g in groups]
        with ProcessPoolExecutor(max_workers=len(groups)) as pool:
            chunks = list(pool.map(_run_sublist_packed, payload))

    results = [None] * plan.m
    failures = []
    for chunk in chunks:
        for index, succeeded, value in chunk:
            if succeeded:
                results[index] = value
            else:
                failures.append((index, value))
    failures.sort()
    return ExecutionResult(results=results, failures=failures)
