import numpy as np
import pytest

from fastod import (ConfigError, CostRecord, DataError, DetectorSpec,
                    collect_timings, featurize, forecast_ranks,
                    load_timings, make_timing_datasets, ranks_from_predictions,
                    save_timings, train_cost_model)
from fastod.costmodel import _fold_ids
from fastod.forest import ForestParams


class TestFeaturize:
    def test_one_hot_layout(self):
        v = featurize(1000, 20, "lof", ["knn", "lof", "hbos"])
        assert v.tolist() == [1000.0, 20.0, 0.0, 1.0, 0.0]

    def test_single_entry_vocabulary(self):
        assert featurize(5, 3, "knn", ["knn"]).shape == (3,)

    def test_unknown_algorithm(self):
        with pytest.raises(ConfigError):
            featurize(10, 2, "lof", ["knn"])


class TestCollectTimings:
    def test_cardinality(self):
        specs = [DetectorSpec("hbos"), DetectorSpec("knn", {"n_neighbors": 3})]
        datasets = make_timing_datasets([(40, 3), (60, 4), (80, 5)], seed=0)
        records = collect_timings(specs, datasets, repeats=2)
        assert len(records) == 6
        assert [r.algo for r in records[:3]] == ["hbos"] * 3
        assert [(r.n, r.d) for r in records[:3]] == [(40, 3), (60, 4), (80, 5)]

    def test_repeats_monotone(self):
        specs = [DetectorSpec("hbos")]
        datasets = make_timing_datasets([(400, 6)], seed=1)
        once = collect_timings(specs, datasets, repeats=1)[0].time_sum_10
        many = collect_timings(specs, datasets, repeats=10)[0].time_sum_10
        assert many >= once

    def test_knn_fit_time_grows_with_n(self):
        specs = [DetectorSpec("knn", {"n_neighbors": 10})]
        datasets = make_timing_datasets(
            [(500, 8), (1000, 8), (2000, 8), (4000, 8)], seed=2)
        records = collect_timings(specs, datasets, repeats=1)
        times = [r.time_sum_10 for r in records]
        assert times == sorted(times)

    def test_failures_skip_with_log(self, caplog):
        # n_neighbors exceeds n for the first dataset: record skipped
        specs = [DetectorSpec("knn", {"n_neighbors": 50})]
        datasets = make_timing_datasets([(20, 3), (100, 3)], seed=3)
        records = collect_timings(specs, datasets, repeats=1)
        assert len(records) == 1
        assert records[0].n == 100

    def test_bad_repeats(self):
        with pytest.raises(ConfigError):
            collect_timings([], [], repeats=0)


def synthetic_records(n_per_algo=15, algos=("knn", "hbos"), seed=0):
    rng = np.random.default_rng(seed)
    base = {"knn": 2.0, "hbos": 1.0, "lof": 3.0}
    records = []
    for algo in algos:
        for _ in range(n_per_algo):
            n = int(rng.integers(100, 5000))
            d = int(rng.integers(2, 60))
            records.append(CostRecord(
                n=n, d=d, algo=algo, params_digest="default",
                time_sum_10=base[algo],
            ))
    return records


class TestTrainCostModel:
    def test_separable_targets_give_perfect_rank_correlation(self):
        model, report = train_cost_model(synthetic_records(),
                                         ForestParams(seed=1))
        for fold in report.folds:
            if fold.rho is not None:
                assert fold.rho == pytest.approx(1.0)
        assert report.mean_rho == pytest.approx(1.0)

    def test_shuffled_targets_give_null_correlation(self):
        rng = np.random.default_rng(7)
        rhos = []
        for repeat in range(20):
            records = []
            for i in range(30):
                records.append(CostRecord(
                    n=int(rng.integers(100, 5000)),
                    d=int(rng.integers(2, 60)),
                    algo="knn" if i % 2 == 0 else "hbos",
                    params_digest="default",
                    time_sum_10=float(rng.uniform(0.1, 10.0)),  # random target
                ))
            _, report = train_cost_model(records, ForestParams(
                n_trees=30, seed=repeat))
            rhos.append(report.mean_rho)
        assert abs(float(np.mean(rhos))) <= 0.3

    def test_too_few_records(self):
        with pytest.raises(DataError):
            train_cost_model(synthetic_records(n_per_algo=5))

    def test_single_algorithm_warns(self):
        with pytest.warns(UserWarning, match="single algorithm"):
            train_cost_model(synthetic_records(n_per_algo=25, algos=("knn",)))

    def test_folds_partition_records(self):
        ids = _fold_ids(35, 10)
        assert ids.shape == (35,)
        assert set(ids.tolist()) == set(range(10))

    def test_forecast_positive_after_inverse_transform(self):
        model, _ = train_cost_model(synthetic_records(), ForestParams(seed=2))
        preds = model.predict_seconds(
            [(DetectorSpec("knn"), 1000, 10), (DetectorSpec("hbos"), 1000, 10)])
        assert np.all(preds > 0)
        assert np.all(np.isfinite(preds))


class TestForecastRanks:
    def test_singleton(self):
        assert ranks_from_predictions([3.5]).tolist() == [1]

    def test_sort_order(self):
        assert ranks_from_predictions([5.0, 1.0, 3.0]).tolist() == [3, 1, 2]

    def test_stable_ties(self):
        assert ranks_from_predictions([2.0, 2.0]).tolist() == [1, 2]

    def test_permutation_property(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            preds = rng.uniform(size=int(rng.integers(1, 40)))
            ranks = ranks_from_predictions(preds)
            assert sorted(ranks.tolist()) == list(range(1, preds.size + 1))

    def test_invariance_under_increasing_transform(self):
        rng = np.random.default_rng(9)
        preds = rng.uniform(0.1, 5.0, size=25)
        base = ranks_from_predictions(preds)
        for transform in (np.log, np.sqrt, lambda x: 3 * x + 1):
            assert np.array_equal(base, ranks_from_predictions(transform(preds)))

    def test_model_based_ranks(self):
        model, _ = train_cost_model(synthetic_records(), ForestParams(seed=3))
        pending = [(DetectorSpec("knn"), 1000, 10),
                   (DetectorSpec("hbos"), 1000, 10),
                   (DetectorSpec("knn"), 2000, 10)]
        ranks = forecast_ranks(model, pending)
        assert sorted(ranks.tolist()) == [1, 2, 3]
        # hbos is the cheap algorithm in the synthetic corpus
        assert ranks[1] == 1

    def test_empty_pending_rejected(self):
        model, _ = train_cost_model(synthetic_records(), ForestParams(seed=4))
        with pytest.raises(DataError):
            forecast_ranks(model, [])


class TestTimingCsv:
    def test_round_trip(self, tmp_path):
        records = synthetic_records(n_per_algo=3)
        path = tmp_path / "timings.csv"
        save_timings(records, path)
        loaded = load_timings(path)
        assert loaded == records

    def test_header_enforced(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\n", encoding="utf-8")
        with pytest.raises(DataError, match="header"):
            load_timings(path)

    def test_invalid_record_values(self):
        with pytest.raises(DataError):
            CostRecord(n=0, d=3, algo="knn", params_digest="x", time_sum_10=1.0)
        with pytest.raises(DataError):
            CostRecord(n=10, d=3, algo="knn", params_digest="x", time_sum_10=0.0)
