import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ncldof.data import (
    ConstantColumnError,
    Dataset,
    SynthSpec,
    kfold,
    kfold_indices,
    load_csv,
    load_features,
    split,
    standardize,
    synthesize,
)


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestLoadCsv:
    def test_three_rows_one_target(self, tmp_path):
        p = write(tmp_path, "a,b,y\n1,2,3\n4,5,6\n7,8,9\n")
        ds = load_csv(p, "y")
        assert (ds.n, ds.d, ds.n_targets) == (3, 2, 1)
        assert ds.feature_names == ("a", "b")
        np.testing.assert_array_equal(ds.y, [3, 6, 9])

    def test_two_targets_of_five_columns(self, tmp_path):
        p = write(tmp_path, "a,b,c,y1,y2\n" + "\n".join(",".join(str(i + j) for j in range(5)) for i in range(4)))
        ds = load_csv(p, ["y1", 4])
        assert (ds.d, ds.n_targets) == (3, 2)

    def test_negative_index_counts_from_end(self, tmp_path):
        p = write(tmp_path, "a,b,y\n1,2,3\n4,5,6\n")
        assert load_csv(p, -1).target_names == ("y",)

    def test_non_numeric_target_cell(self, tmp_path):
        p = write(tmp_path, "a,y\n1,2\n3,oops\n")
        with pytest.raises(ValueError, match="non-numeric"):
            load_csv(p, "y")

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_csv(tmp_path / "none.csv", "y")

    @pytest.mark.parametrize("sel,msg", [([], "empty"), (["y", "y"], "duplicate"), ("zz", "unknown")])
    def test_bad_selection(self, tmp_path, sel, msg):
        p = write(tmp_path, "a,y\n1,2\n3,4\n")
        with pytest.raises(ValueError, match=msg):
            load_csv(p, sel)

    def test_label_column_skipped(self, tmp_path):
        p = write(tmp_path, "id,a,y\nr1,1,2\nr2,3,5\n")
        assert load_csv(p, "y").feature_names == ("a",)

    def test_missing_cell_raises_or_drops(self, tmp_path):
        p = write(tmp_path, "a,y\n1,2\n,4\n5,6\n")
        with pytest.raises(ValueError, match="row 3"):
            load_csv(p, "y")
        assert load_csv(p, "y", drop_nonfinite=True).n == 2

    def test_load_features_by_name(self, tmp_path):
        p = write(tmp_path, "b,y,a\n1,2,3\n4,5,6\n")
        np.testing.assert_array_equal(load_features(p, ("a", "b")), [[3, 1], [6, 4]])
        with pytest.raises(ValueError, match="missing"):
            load_features(p, ("c",))


class TestStandardize:
    def test_column_one_two_three(self):
        ds, params = standardize(Dataset(np.array([[1.0], [2.0], [3.0]]), np.array([0.0, 1.0, 5.0])))
        np.testing.assert_allclose(ds.features[:, 0], [-np.sqrt(1.5), 0, np.sqrt(1.5)], atol=1e-15)
        assert params.feature_stds[0] == pytest.approx(np.sqrt(2 / 3))

    def test_constant_column_named(self):
        raw = Dataset(np.array([[5.0, 1], [5, 2], [5, 3]]), np.array([1.0, 2, 4]), ("const", "x"))
        with pytest.raises(ConstantColumnError, match="constant column 'const'"):
            standardize(raw)

    @settings(max_examples=40, deadline=None)
    @given(arrays(float, (12, 3), elements=st.floats(-1e3, 1e3)))
    def test_idempotent_and_invertible(self, A):
        if np.any(A.std(0) < 1e-3 * (1 + np.abs(A).max())):
            return
        raw = Dataset(A[:, :2], A[:, 2])
        once, params = standardize(raw)
        twice, _ = standardize(once)
        np.testing.assert_allclose(twice.features, once.features, atol=1e-12)
        np.testing.assert_allclose(once.features.mean(0), 0, atol=1e-12)
        np.testing.assert_allclose(once.features.std(0), 1, atol=1e-12)
        np.testing.assert_allclose(params.inverse(once).features, raw.features, atol=1e-10 * (1 + np.abs(A).max()))
        np.testing.assert_allclose(params.apply(raw).targets, once.targets, atol=1e-12)


class TestSplits:
    def test_split_sizes_and_determinism(self):
        ds = Dataset(np.arange(20.0).reshape(10, 2), np.arange(10.0))
        tr, te = split(ds, 0.2, 7)
        assert (tr.n, te.n) == (8, 2)
        assert not set(tr.y) & set(te.y)
        tr2, _ = split(ds, 0.2, 7)
        np.testing.assert_array_equal(tr.y, tr2.y)

    @pytest.mark.parametrize("f", [0.0, 1.0, 1.5])
    def test_split_fraction_range(self, f):
        ds = Dataset(np.arange(20.0).reshape(10, 2), np.arange(10.0))
        with pytest.raises(ValueError):
            split(ds, f, 0)

    @pytest.mark.parametrize("n,k,sizes", [(10, 5, [2] * 5), (7, 5, [1, 1, 1, 2, 2])])
    def test_kfold_sizes(self, n, k, sizes):
        folds = kfold_indices(n, k, 0)
        assert sorted(len(v) for _, v in folds) == sizes
        np.testing.assert_array_equal(np.sort(np.concatenate([v for _, v in folds])), np.arange(n))
        for tr, v in folds:
            assert not set(tr) & set(v) and len(tr) + len(v) == n

    def test_kfold_k_out_of_range(self):
        ds = Dataset(np.arange(10.0).reshape(5, 2), np.arange(5.0))
        with pytest.raises(ValueError):
            kfold(ds, 1, 0)
        with pytest.raises(ValueError):
            kfold(ds, 6, 0)


class TestSynthesize:
    def test_noiseless(self):
        s = synthesize(SynthSpec(50, 3, sigma=0.0, seed=1))
        np.testing.assert_array_equal(s.dataset.y, s.mu_values)
        assert s.dataset.features.min() >= -1 and s.dataset.features.max() <= 1

    def test_noise_level(self):
        s = synthesize(SynthSpec(10_000, 2, sigma=1.0, seed=2))
        assert abs(np.std(s.dataset.y - s.mu_values) - 1.0) < 0.05

    def test_deterministic(self):
        a = synthesize(SynthSpec(30, 2, sigma=0.3, seed=5))
        b = synthesize(SynthSpec(30, 2, sigma=0.3, seed=5))
        assert np.array_equal(a.dataset.features, b.dataset.features) and np.array_equal(a.dataset.y, b.dataset.y)

    def test_default_function(self):
        s = synthesize(SynthSpec(5, 2, seed=0))
        X = s.dataset.features
        np.testing.assert_allclose(s.mu_values, np.sin(3 * X).sum(1) + 0.5 * np.cos(7 * X[:, 0]))

    def test_negative_sigma_rejected(self):
        with pytest.raises(ValueError):
            SynthSpec(10, 2, sigma=-1.0)
