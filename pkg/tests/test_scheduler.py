import time

import numpy as np
import pytest

from fastod import ConfigError, DataError, execute, imbalance, makespan, plan_bps, plan_simple
from fastod.scheduler import EXACT_SEARCH_LIMIT, _plan_lpt

from oracles import brute_schedule_optimum


def partition_is_exact(plan):
    flat = sorted(i for group in plan.assignments for i in group)
    return flat == list(range(plan.m))


class TestPlanBps:
    def test_four_tasks_two_workers(self):
        plan = plan_bps([1, 2, 3, 4], 2)
        assert sorted(plan.rank_sums().tolist()) == [5.0, 5.0]
        assert partition_is_exact(plan)

    def test_hundred_tasks_four_workers_near_ideal(self):
        plan = plan_bps(list(range(1, 101)), 4)
        ideal = (100 * 100 + 100) / (2 * 4)
        assert np.all(np.abs(plan.rank_sums() - ideal) <= 100)
        assert partition_is_exact(plan)

    def test_seven_tasks_three_workers_is_optimal(self):
        ranks = [1, 2, 3, 4, 5, 6, 7]
        plan = plan_bps(ranks, 3)
        greedy_objective = imbalance(plan, ranks)
        assert greedy_objective == pytest.approx(
            brute_schedule_optimum(ranks, 3))

    def test_not_a_permutation_rejected(self):
        with pytest.raises(DataError):
            plan_bps([1, 2, 2], 2)
        with pytest.raises(DataError):
            plan_bps([2, 3, 4], 2)

    def test_rank_sums_within_max_rank_of_ideal(self):
        rng = np.random.default_rng(0)
        for trial in range(30):
            m = int(rng.integers(1, 120))
            t = int(rng.integers(1, 9))
            ranks = rng.permutation(m) + 1
            plan = plan_bps(ranks.tolist(), t)
            ideal = (m * m + m) / (2 * t)
            assert np.all(np.abs(plan.rank_sums() - ideal) <= m)
            assert partition_is_exact(plan)

    def test_makespan_monotone_in_workers(self):
        for m in (3, 8, 12, 40, 100):
            ranks = list(range(1, m + 1))
            spans = [makespan(plan_bps(ranks, t), ranks)
                     for t in range(1, 9)]
            assert all(b <= a + 1e-9 for a, b in zip(spans, spans[1:]))

    def test_greedy_fallback_engages_beyond_limit(self):
        m, t = 40, 4
        assert t ** m > EXACT_SEARCH_LIMIT
        ranks = list(range(1, m + 1))
        plan = plan_bps(ranks, t)
        lpt_groups = _plan_lpt(np.asarray(ranks), t)
        assert plan.assignments == lpt_groups


class TestGreedyVsOptimal:
    def test_exhaustive_small_instances(self):
        equal = 0
        total = 0
        for t in (1, 2, 3):
            for m in range(1, 9):
                ranks = list(range(1, m + 1))
                objective = imbalance(plan_bps(ranks, t), ranks)
                optimum = brute_schedule_optimum(ranks, t)
                total += 1
                if abs(objective - optimum) < 1e-9:
                    equal += 1
                assert objective <= 1.5 * optimum + 1e-9, (m, t)
        assert equal / total >= 0.90


class TestPlanSimple:
    def test_hundred_over_four(self):
        plan = plan_simple(100, 4)
        assert plan.assignments[0] == list(range(0, 25))
        assert plan.assignments[1] == list(range(25, 50))
        assert plan.assignments[3] == list(range(75, 100))

    def test_ceiling_chunking(self):
        plan = plan_simple(5, 2)
        assert plan.assignments == [[0, 1, 2], [3, 4]]

    def test_more_workers_than_tasks(self):
        plan = plan_simple(3, 5)
        assert plan.assignments == [[0], [1], [2], [], []]

    def test_partition_property(self):
        for m, t in [(1, 1), (7, 3), (12, 5), (30, 4)]:
            assert partition_is_exact(plan_simple(m, t))


class TestImbalance:
    def test_perfect_balance_is_zero(self):
        plan = plan_simple(4, 2)
        assert imbalance(plan, [1.0, 1.0, 1.0, 1.0]) == 0.0

    def test_hand_computation(self):
        # both tasks on worker 0: |0 - 2| + |4 - 2| = 4
        from fastod import SchedulePlan
        plan = SchedulePlan(assignments=[[0, 1], []], m=2, t=2)
        assert imbalance(plan, [1.0, 3.0]) == pytest.approx(4.0)

    def test_bps_never_worse_than_simple_on_rank_loads(self):
        rng = np.random.default_rng(1)
        for trial in range(100):
            ranks = (rng.permutation(30) + 1).tolist()
            bps = imbalance(plan_bps(ranks, 4), ranks)
            simple = imbalance(plan_simple(30, 4), ranks)
            assert bps <= simple + 1e-9

    def test_length_mismatch(self):
        with pytest.raises(DataError):
            imbalance(plan_simple(3, 2), [1.0, 2.0])


class TestExecute:
    def test_single_worker_equals_sequential(self):
        tasks = [lambda i=i: i * i for i in range(8)]
        out = execute(plan_simple(8, 1), tasks, backend="thread")
        assert out.results == [i * i for i in range(8)]
        assert out.ok

    def test_results_invariant_across_worker_counts(self):
        tasks = [lambda i=i: (i, i + 0.5) for i in range(12)]
        ranks = list(range(1, 13))
        serial = execute(plan_simple(12, 1), tasks, backend="serial")
        threaded = execute(plan_bps(ranks, 4), tasks, backend="thread")
        assert serial.results == threaded.results

    def test_failure_captured_without_aborting_siblings(self):
        def boom():
            raise RuntimeError("broken task")

        tasks = [lambda: 1, boom, lambda: 3]
        out = execute(plan_simple(3, 2), tasks, backend="thread")
        assert out.results == [1, None, 3]
        assert len(out.failures) == 1
        assert out.failures[0][0] == 1
        assert "broken task" in out.failures[0][1]
        assert not out.ok

    def test_process_backend(self):
        import functools
        tasks = [functools.partial(abs, -i) for i in range(6)]
        out = execute(plan_simple(6, 2), tasks, backend="process")
        assert out.results == [0, 1, 2, 3, 4, 5]

    def test_task_count_mismatch(self):
        with pytest.raises(DataError):
            execute(plan_simple(3, 1), [lambda: 1], backend="serial")

    def test_unknown_backend(self):
        with pytest.raises(ConfigError):
            execute(plan_simple(1, 1), [lambda: 1], backend="gpu")

    def test_sleep_workload_bps_beats_simple(self):
        # grouped cheap-to-expensive tasks mirror a heterogeneous ensemble
        m, t, unit = 24, 3, 0.004
        ranks = list(range(1, m + 1))
        tasks = [lambda r=r: time.sleep(r * unit) for r in ranks]

        start = time.perf_counter()
        execute(plan_simple(m, t), tasks, backend="thread")
        simple_s = time.perf_counter() - start

        start = time.perf_counter()
        execute(plan_bps(ranks, t), tasks, backend="thread")
        bps_s = time.perf_counter() - start
        assert bps_s < simple_s


class TestSchedulePlanInvariants:
    def test_duplicate_task_rejected(self):
        from fastod import SchedulePlan
        with pytest.raises(ConfigError):
            SchedulePlan(assignments=[[0, 1], [1]], m=3, t=2)

    def test_balanced_plans_use_every_worker_when_possible(self):
        rng = np.random.default_rng(5)
        for trial in range(20):
            m = int(rng.integers(2, 60))
            t = int(rng.integers(1, min(m, 8) + 1))
            plan = plan_bps((rng.permutation(m) + 1).tolist(), t)
            assert all(group for group in plan.assignments)

    def test_simple_plan_may_idle_trailing_workers(self):
        # ceil(12/5) = 3 covers all twelve tasks in four chunks
        plan = plan_simple(12, 5)
        assert plan.assignments[4] == []

    def test_rank_sums_need_ranks(self):
        plan = plan_simple(3, 2)
        with pytest.raises(DataError):
            plan.rank_sums()
