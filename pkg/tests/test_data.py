import numpy as np
import pytest

from dpsummary.baselines import greedy_nonprivate
from dpsummary.data import (DataError, Dataset, GaussianSpec, OwnerSplit, load_csv, split_owners,
                            standardize, synth_shift, two_gaussian_shift)
from dpsummary.kernel import KernelParams


def test_load_csv_parses(tmp_path):
    f = tmp_path / "a.csv"
    f.write_text("1,2\n3,4\n5,6\n")
    ds = load_csv(f)
    assert len(ds) == 3 and ds.dim == 2
    np.testing.assert_array_equal(ds.points, [[1, 2], [3, 4], [5, 6]])


def test_load_csv_header(tmp_path):
    f = tmp_path / "h.csv"
    f.write_text("x,y\n1,2\n")
    assert len(load_csv(f, has_header=True)) == 1


@pytest.mark.parametrize("text,msg", [
    ("", "no data rows"),
    ("a,b\n", "row 1, column 1"),
    ("1,2\n3\n", "row 2 has 1 columns"),
    ("1,nan\n", "non-finite value at row 1, column 2"),
])
def test_load_csv_errors(tmp_path, text, msg):
    f = tmp_path / "bad.csv"
    f.write_text(text)
    with pytest.raises(DataError, match=msg):
        load_csv(f)


def test_dataset_rejects_non_finite_and_is_read_only():
    with pytest.raises(DataError):
        Dataset(np.array([[1.0, np.inf]]))
    ds = Dataset(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        ds.points[0, 0] = 1.0
    assert len(Dataset.empty(3)) == 0 and Dataset.empty(3).dim == 3


def test_split_fractions_exact_and_deterministic():
    ds = Dataset(np.arange(200.0).reshape(100, 2))
    a = split_owners(ds, [0.5, 0.5], 7)
    b = split_owners(ds, [0.5, 0.5], 7)
    assert [len(o.dataset) for o in a] == [50, 50]
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x.source_index, y.source_index)
    # partition: disjoint and covering
    idx = np.concatenate([o.source_index for o in a])
    assert sorted(idx.tolist()) == list(range(100))


def test_split_single_owner_and_index_lists():
    ds = Dataset(np.arange(20.0).reshape(10, 2))
    (only,) = split_owners(ds, [1.0], 123)
    assert len(only.dataset) == 10
    owners = split_owners(ds, [[0, 1], [5, 9]], 0)
    np.testing.assert_array_equal(owners[1].dataset.points, ds.points[[5, 9]])
    with pytest.raises(DataError):
        split_owners(ds, [[0, 1], [1, 2]], 0)
    with pytest.raises(DataError):
        split_owners(ds, [0.7, 0.7], 0)


def test_synth_shift_means_and_empty():
    owners, val = synth_shift(3, [GaussianSpec(100, [0, 0, 0])], GaussianSpec(100, [0, 0, 0]), 11)
    assert np.all(np.abs(owners[0].dataset.points.mean(axis=0)) < 0.5)
    assert np.all(np.abs(val.points.mean(axis=0)) < 0.5)
    owners, val = synth_shift(2, [GaussianSpec(0, [0, 0])], GaussianSpec(0, [0, 0]), 0)
    assert len(owners[0].dataset) == 0 and len(val) == 0


def test_gaussian_spec_full_covariance():
    rng = np.random.default_rng(0)
    cov = np.array([[2.0, 0.5], [0.5, 1.0]])
    ds = GaussianSpec(20000, [1.0, -1.0], cov).sample(2, rng)
    np.testing.assert_allclose(np.cov(ds.points.T), cov, atol=0.08)
    with pytest.raises(DataError):
        GaussianSpec(3, [0, 0], np.array([[1.0, 2.0], [2.0, 1.0]])).sample(2, rng)


def test_greedy_prefers_matching_owner():
    owners, val = two_gaussian_shift(n=2, sizes=(100, 100), shift=3.0, validation_size=100, rng_seed=4)
    g = greedy_nonprivate(owners, val, 30, KernelParams(0.1))
    share = np.mean([o == 2 for o, _ in g.selected])
    assert share >= 0.8


def test_standardize_uses_validation_statistics():
    owners = [OwnerSplit(1, Dataset(np.array([[10.0, 0.0], [12.0, 2.0]])))]
    val = Dataset(np.array([[0.0, 0.0], [2.0, 4.0]]))
    new_owners, new_val = standardize(owners, val)
    np.testing.assert_allclose(new_val.points.mean(axis=0), 0.0)
    np.testing.assert_allclose(new_owners[0].dataset.points[0], [9.0, -1.0])
