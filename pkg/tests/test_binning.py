import numpy as np
import pytest

from soilnitro import FeatureTable, bin_features
from soilnitro.errors import InvalidParamsError


def test_two_bin_quantile_split():
    ft = FeatureTable(np.array([[1.0], [2.0], [3.0], [4.0]]), ("x",))
    bt = bin_features(ft, 2)
    assert bt.bin_edges[0].tolist() == [2.5]
    assert bt.codes[:, 0].tolist() == [0, 0, 1, 1]


def test_constant_column_unsplittable():
    ft = FeatureTable(np.array([[5.0], [5.0], [5.0]]), ("x",))
    bt = bin_features(ft, 8)
    assert bt.bin_edges[0].size == 0
    assert bt.codes[:, 0].tolist() == [0, 0, 0]


def test_missing_routing():
    ft = FeatureTable(np.array([[1.0], [np.nan], [3.0]]), ("x",))
    bt = bin_features(ft, 4)
    assert bt.codes[1, 0] == bt.missing_code
    assert bt.codes[0, 0] == 0
    assert bt.codes[2, 0] == bt.bin_edges[0].size  # top bin


def test_all_missing_feature_warns():
    ft = FeatureTable(np.array([[np.nan, 1.0], [np.nan, 2.0]]), ("dead", "ok"))
    with pytest.warns(UserWarning, match="dead"):
        bt = bin_features(ft, 4)
    assert bt.bin_edges[0].size == 0
    assert (bt.codes[:, 0] == bt.missing_code).all()


def test_codes_consistent_with_edges(rng):
    vals = rng.normal(size=(500, 4))
    vals[rng.uniform(size=vals.shape) < 0.1] = np.nan
    ft = FeatureTable(vals, tuple("abcd"))
    bt = bin_features(ft, 16)
    for j in range(4):
        edges = bt.bin_edges[j]
        assert np.all(np.diff(edges) > 0)
        for i in range(500):
            v = vals[i, j]
            c = bt.codes[i, j]
            if np.isnan(v):
                assert c == bt.missing_code
                continue
            # code counts the edges strictly below the value
            assert c == np.sum(edges < v)
            if c > 0:
                assert v > edges[c - 1]
            if c < edges.size:
                assert v <= edges[c]


def test_binning_deterministic(rng):
    vals = rng.normal(size=(200, 3))
    ft = FeatureTable(vals, ("a", "b", "c"))
    b1 = bin_features(ft, 32)
    b2 = bin_features(ft, 32)
    assert np.array_equal(b1.codes, b2.codes)
    for e1, e2 in zip(b1.bin_edges, b2.bin_edges):
        assert np.array_equal(e1, e2)


def test_bounds_validation():
    ft = FeatureTable(np.zeros((2, 1)), ("x",))
    with pytest.raises(InvalidParamsError):
        bin_features(ft, 1)
    with pytest.raises(InvalidParamsError):
        bin_features(ft, 257)
