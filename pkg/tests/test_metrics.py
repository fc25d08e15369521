import numpy as np
import pytest

from fastod import DataError, evaluate, precision_at_n, roc_auc, spearman

from oracles import enumerate_p_at_n, pair_count_auc, spearman_rank_formula


class TestRocAuc:
    def test_perfect_separation(self):
        assert roc_auc([0, 0, 1, 1], [0.1, 0.2, 0.8, 0.9]) == 1.0

    def test_perfect_inversion(self):
        assert roc_auc([0, 0, 1, 1], [0.9, 0.8, 0.2, 0.1]) == 0.0

    def test_tie_example(self):
        # outlier-inlier pairs: 3 strict wins + 1 tie = 3.5 of 4
        assert roc_auc([0, 1, 0, 1], [0.4, 0.4, 0.2, 0.9]) == pytest.approx(0.875)

    def test_matches_pair_counting_on_random_instances(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            n = int(rng.integers(4, 30))
            labels = np.zeros(n, dtype=int)
            labels[rng.choice(n, size=int(rng.integers(1, n)), replace=False)] = 1
            if labels.sum() in (0, n):
                continue
            scores = rng.choice([0.1, 0.25, 0.5, 0.9], size=n)  # force ties
            assert roc_auc(labels, scores) == pytest.approx(
                pair_count_auc(labels, scores), abs=1e-12)

    def test_monotone_invariance(self):
        rng = np.random.default_rng(1)
        labels = np.array([0, 1] * 10)
        scores = rng.standard_normal(20)
        assert roc_auc(labels, scores) == pytest.approx(
            roc_auc(labels, np.exp(scores)))

    def test_complement_identity_without_ties(self):
        rng = np.random.default_rng(2)
        labels = np.array([0] * 7 + [1] * 5)
        scores = rng.permutation(12).astype(float)
        assert roc_auc(labels, scores) + roc_auc(labels, -scores) == pytest.approx(1.0)

    def test_single_class_rejected(self):
        with pytest.raises(DataError):
            roc_auc([1, 1], [0.1, 0.2])


class TestPrecisionAtN:
    def test_all_outliers_on_top(self):
        assert precision_at_n([1, 1, 0, 0], [0.9, 0.8, 0.2, 0.1]) == 1.0

    def test_all_outliers_on_bottom(self):
        assert precision_at_n([1, 1, 0, 0], [0.1, 0.2, 0.8, 0.9]) == 0.0

    def test_hand_enumeration(self):
        labels = [1, 0, 1, 0, 0]
        scores = [0.9, 0.8, 0.1, 0.7, 0.6]
        assert precision_at_n(labels, scores) == pytest.approx(0.5)

    def test_matches_enumeration_on_random_instances(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            n = int(rng.integers(4, 30))
            labels = np.zeros(n, dtype=int)
            labels[rng.choice(n, size=int(rng.integers(1, n)), replace=False)] = 1
            if labels.sum() in (0, n):
                continue
            scores = rng.choice([0.1, 0.3, 0.5, 0.7], size=n)
            assert precision_at_n(labels, scores) == pytest.approx(
                enumerate_p_at_n(labels, scores), abs=1e-12)

    def test_cutoff_tie_broken_by_index(self):
        # two tied candidates at the cutoff: the earlier index enters top-n
        labels = [0, 1, 1]
        scores = [0.5, 0.5, 0.9]
        # n=2, order: idx2 (0.9), then idx0 beats idx1 on the tie
        assert precision_at_n(labels, scores) == pytest.approx(0.5)

    def test_monotone_invariance(self):
        rng = np.random.default_rng(4)
        labels = np.array([0, 0, 1] * 5)
        scores = rng.standard_normal(15)
        assert precision_at_n(labels, scores) == pytest.approx(
            precision_at_n(labels, 3.0 * scores + 7.0))


class TestSpearman:
    def test_identity(self):
        assert spearman([1, 2, 3, 5], [1, 2, 3, 5]) == pytest.approx(1.0)

    def test_reversal(self):
        assert spearman([1, 2, 3, 5], [-1, -2, -3, -5]) == pytest.approx(-1.0)

    def test_rank_difference_formula(self):
        # 1 - 6*sum(d^2)/(n(n^2-1)) = 1 - 12/60
        assert spearman([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8)

    def test_matches_formula_on_tie_free_instances(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            n = int(rng.integers(3, 25))
            a = rng.permutation(n).astype(float)
            b = rng.permutation(n).astype(float)
            assert spearman(a, b) == pytest.approx(
                spearman_rank_formula(a, b), abs=1e-12)

    def test_monotone_invariance(self):
        rng = np.random.default_rng(6)
        a = rng.standard_normal(30)
        b = rng.standard_normal(30)
        assert spearman(a, b) == pytest.approx(spearman(np.exp(a), b ** 3))

    def test_zero_variance_rejected(self):
        with pytest.raises(DataError):
            spearman([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])

    def test_short_input_rejected(self):
        with pytest.raises(DataError):
            spearman([1.0, 2.0], [1.0, 2.0])


class TestEvaluate:
    def test_bundles_both_metrics(self):
        labels = [0, 0, 1, 1]
        scores = [0.1, 0.2, 0.9, 0.8]
        result = evaluate(labels, scores)
        assert result.roc_auc == 1.0
        assert result.p_at_n == 1.0
        assert result.n_outliers == 2
