import numpy as np
import pytest

from fastod import DataError, DataMatrix, load_csv, standardize, synth_blob, train_test_split


def write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestLoadCsv:
    def test_label_column_extracted(self, tmp_path):
        path = write(tmp_path, "a,b,label\n1,2,0\n3,4,1\n5,6,0\n")
        ds = load_csv(path, label_column="label")
        assert (ds.n, ds.d) == (3, 2)
        assert ds.labels.tolist() == [0, 1, 0]
        assert ds.feature_names == ["a", "b"]
        assert ds.values[1].tolist() == [3.0, 4.0]

    def test_all_columns_are_features_without_label(self, tmp_path):
        path = write(tmp_path, "a,b,label\n1,2,0\n3,4,1\n5,6,0\n")
        ds = load_csv(path)
        assert (ds.n, ds.d) == (3, 3)
        assert ds.labels is None

    def test_nan_cell_names_row_and_column(self, tmp_path):
        path = write(tmp_path, "a,b\n1,2\n3,NaN\n")
        with pytest.raises(DataError, match=r"row 3.*'b'"):
            load_csv(path)

    def test_non_numeric_cell_names_row_and_column(self, tmp_path):
        path = write(tmp_path, "a,b\n1,2\nx,4\n")
        with pytest.raises(DataError, match=r"row 3.*'a'"):
            load_csv(path)

    def test_ragged_row_reports_row(self, tmp_path):
        path = write(tmp_path, "a,b\n1,2\n3\n")
        with pytest.raises(DataError, match="row 3"):
            load_csv(path)

    def test_label_outside_01_rejected(self, tmp_path):
        path = write(tmp_path, "a,label\n1,2\n2,0\n")
        with pytest.raises(DataError, match="label"):
            load_csv(path, label_column="label")

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="no such file"):
            load_csv(tmp_path / "absent.csv")

    def test_missing_label_column(self, tmp_path):
        path = write(tmp_path, "a,b\n1,2\n")
        with pytest.raises(DataError, match="no column named"):
            load_csv(path, label_column="label")

    def test_row_order_preserved(self, tmp_path):
        path = write(tmp_path, "a\n5\n3\n9\n")
        ds = load_csv(path)
        assert ds.values.ravel().tolist() == [5.0, 3.0, 9.0]


class TestSplit:
    def make(self, n_in=8, n_out=2):
        values = np.arange(float((n_in + n_out) * 2)).reshape(-1, 2)
        labels = np.array([0] * n_in + [1] * n_out)
        return DataMatrix(values, labels=labels)

    def test_stratified_counts(self):
        pair = train_test_split(self.make(8, 2), 0.6, seed=0)
        assert pair.train.n == 6 and pair.test.n == 4
        assert pair.train.labels.sum() >= 1
        assert pair.test.labels.sum() >= 1

    def test_deterministic(self):
        ds = self.make(8, 2)
        a = train_test_split(ds, 0.6, seed=3)
        b = train_test_split(ds, 0.6, seed=3)
        assert np.array_equal(a.train.values, b.train.values)
        assert np.array_equal(a.test.values, b.test.values)

    def test_sixty_forty(self):
        values = np.random.default_rng(0).standard_normal((100, 3))
        labels = np.zeros(100, dtype=int)
        labels[:10] = 1
        pair = train_test_split(DataMatrix(values, labels=labels), 0.6, seed=1)
        assert pair.train.n == 60 and pair.test.n == 40

    def test_stratification_bound(self):
        rng = np.random.default_rng(7)
        for trial in range(20):
            n = int(rng.integers(20, 200))
            n_out = int(rng.integers(2, max(3, n // 4)))
            values = rng.standard_normal((n, 2))
            labels = np.zeros(n, dtype=int)
            labels[:n_out] = 1
            ds = DataMatrix(values, labels=labels)
            frac = float(rng.uniform(0.3, 0.8))
            pair = train_test_split(ds, frac, seed=trial)
            source_rate = n_out / n
            train_rate = pair.train.labels.sum() / pair.train.n
            assert abs(train_rate - source_rate) <= 1.0 / pair.train.n + 1e-12

    def test_partition_is_exact(self):
        ds = self.make(10, 3)
        pair = train_test_split(ds, 0.5, seed=2)
        merged = np.vstack([pair.train.values, pair.test.values])
        assert merged.shape[0] == ds.n
        combined = {tuple(row) for row in merged}
        original = {tuple(row) for row in ds.values}
        assert combined == original

    def test_unlabeled_split(self):
        ds = DataMatrix(np.arange(20.0).reshape(10, 2))
        pair = train_test_split(ds, 0.6, seed=0)
        assert pair.train.n == 6 and pair.test.n == 4

    def test_bad_fraction(self):
        with pytest.raises(DataError):
            train_test_split(self.make(), 1.2, seed=0)

    def test_tiny_class_rejected(self):
        values = np.arange(10.0).reshape(5, 2)
        ds = DataMatrix(values, labels=np.array([0, 0, 0, 0, 1]))
        with pytest.raises(DataError, match="2 members"):
            train_test_split(ds, 0.6, seed=0)


class TestSynthBlob:
    def test_counts_and_fraction(self):
        ds = synth_blob(160, 40, 2, seed=0)
        assert ds.n == 200
        assert int(ds.labels.sum()) == 40
        assert ds.labels.mean() == pytest.approx(0.20)

    def test_degenerate_class(self):
        ds = synth_blob(5, 0, 3, seed=0)
        assert ds.labels.tolist() == [0] * 5

    def test_deterministic(self):
        a = synth_blob(30, 10, 4, seed=9)
        b = synth_blob(30, 10, 4, seed=9)
        assert np.array_equal(a.values, b.values)

    def test_inliers_inside_box(self):
        ds = synth_blob(500, 0, 3, seed=1)
        assert ds.values.min() >= -4.0 and ds.values.max() <= 4.0

    def test_both_zero_rejected(self):
        with pytest.raises(DataError):
            synth_blob(0, 0, 2, seed=0)


class TestStandardize:
    def test_zscore(self):
        ds = DataMatrix(np.array([[1.0], [2.0], [3.0]]))
        out, stats = standardize(ds)
        assert out.values.mean() == pytest.approx(0.0)
        assert out.values.std(ddof=1) == pytest.approx(1.0)
        assert not stats.degenerate.any()

    def test_constant_column_centered_only(self):
        ds = DataMatrix(np.array([[5.0, 1.0], [5.0, 2.0], [5.0, 3.0]]))
        out, stats = standardize(ds)
        assert np.allclose(out.values[:, 0], 0.0)
        assert stats.degenerate.tolist() == [True, False]

    def test_stats_reproduce_training_transform(self):
        rng = np.random.default_rng(4)
        ds = DataMatrix(rng.standard_normal((20, 3)) * 5 + 2)
        out, stats = standardize(ds)
        assert np.array_equal(stats.transform(ds.values), out.values)

    def test_needs_two_rows(self):
        with pytest.raises(DataError):
            standardize(DataMatrix(np.array([[1.0, 2.0]])))

    def test_labels_carried(self):
        ds = DataMatrix(np.array([[1.0], [2.0], [3.0]]),
                        labels=np.array([0, 1, 0]))
        out, _ = standardize(ds)
        assert out.labels.tolist() == [0, 1, 0]


class TestDataMatrix:
    def test_rejects_non_finite(self):
        with pytest.raises(DataError):
            DataMatrix(np.array([[1.0, np.inf]]))

    def test_rejects_bad_labels(self):
        with pytest.raises(DataError):
            DataMatrix(np.eye(2), labels=np.array([0, 2]))

    def test_values_read_only(self):
        ds = DataMatrix(np.eye(3))
        with pytest.raises(ValueError):
            ds.values[0, 0] = 5.0
