import math

import numpy as np
import pytest

from soilnitro import (
    Dataset,
    FeatureTable,
    TargetScale,
    TargetVector,
    inverse_transform_target,
    load_csv,
    transform_target,
    write_csv,
)
from soilnitro.data import load_feature_csv
from soilnitro.errors import (
    AlreadyOriginalError,
    AlreadyTransformedError,
    CsvParseError,
    DimensionMismatchError,
    MissingColumnError,
    MissingFeatureError,
    NonPositiveTargetError,
)


def test_transform_log_of_unity():
    y = TargetVector(np.array([0.01]))
    z = transform_target(y)
    assert z.scale is TargetScale.TRANSFORMED_LOG
    assert z.values[0] == 0.0


def test_transform_known_values():
    # ln(250) and ln(100), cross-checked against mpmath at 50 digits
    mpmath = pytest.importorskip("mpmath")
    mpmath.mp.dps = 50
    z = transform_target(TargetVector(np.array([2.5, 1.0])))
    assert z.values[0] == pytest.approx(float(mpmath.log(250)), abs=1e-12)
    assert z.values[1] == pytest.approx(float(mpmath.log(100)), abs=1e-12)
    # frozen literals from the same oracle
    assert z.values[0] == pytest.approx(5.521460917862246, abs=1e-9)
    assert z.values[1] == pytest.approx(4.605170185988091, abs=1e-9)


def test_inverse_transform_examples():
    z = TargetVector(np.array([0.0, 4.605170185988091]), TargetScale.TRANSFORMED_LOG)
    y = inverse_transform_target(z)
    assert y.scale is TargetScale.ORIGINAL
    assert y.values[0] == pytest.approx(0.01, abs=1e-15)
    assert y.values[1] == pytest.approx(1.0, abs=1e-9)
    # round-trip of the ln(250) example recovers 2.5
    z25 = transform_target(TargetVector(np.array([2.5])))
    single = inverse_transform_target(z25)
    assert single.values[0] == pytest.approx(2.5, abs=1e-9)


def test_transform_round_trip_wide_range(rng):
    y = TargetVector(10.0 ** rng.uniform(-4, 4, size=10_000))
    back = inverse_transform_target(transform_target(y))
    assert np.all(np.abs(back.values - y.values) <= 1e-12 * np.abs(y.values))


def test_transform_scale_guards():
    y = TargetVector(np.array([1.0]))
    z = transform_target(y)
    with pytest.raises(AlreadyTransformedError):
        transform_target(z)
    with pytest.raises(AlreadyOriginalError):
        inverse_transform_target(y)


def test_target_positivity_enforced():
    with pytest.raises(NonPositiveTargetError):
        TargetVector(np.array([1.0, 0.0]))
    with pytest.raises(NonPositiveTargetError):
        TargetVector(np.array([-2.0]))


def test_feature_table_invariants():
    with pytest.raises(DimensionMismatchError):
        FeatureTable(np.zeros((2, 3)), ("a", "b"))
    with pytest.raises(DimensionMismatchError):
        FeatureTable(np.zeros((2, 2)), ("a", "a"))
    with pytest.raises(DimensionMismatchError):
        FeatureTable(np.array([[np.inf, 0.0]]), ("a", "b"))
    ft = FeatureTable(np.array([[1.0, np.nan]]), ("a", "b"))
    assert ft.missing_mask.tolist() == [[False, True]]


def test_dataset_invariants():
    ft = FeatureTable(np.zeros((3, 1)), ("a",))
    y = TargetVector(np.ones(3))
    with pytest.raises(DimensionMismatchError):
        Dataset(ft, y, ("c", "c"))
    with pytest.raises(DimensionMismatchError):
        Dataset(ft, y, ("c", "", "c"))
    with pytest.raises(DimensionMismatchError):
        Dataset(ft, y, ("c", "c", "c"), ids=("1", "1", "2"))
    ds = Dataset(ft, y, ("c", "g", "c"))
    assert ds.classes() == ("c", "g")
    assert ds.filter_landcover("g").n_rows == 1


def _write(tmp_path, text, name="data.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_load_csv_column_partition(tmp_path):
    p = _write(tmp_path, "id,slope,ndvi,lc,n\n"
                         "a,1.0,0.5,cropland,2.0\n"
                         "b,2.0,NA,grassland,0.5\n"
                         "c,3.0,0.7,cropland,1.5\n")
    ds = load_csv(p, target_column="n", landcover_column="lc", id_column="id")
    assert ds.n_rows == 3
    assert ds.features.n_cols == 2
    assert ds.features.names == ("slope", "ndvi")
    assert ds.ids == ("a", "b", "c")
    assert math.isnan(ds.features.values[1, 1])
    assert ds.landcover == ("cropland", "grassland", "cropland")


def test_load_csv_zero_target_rejected(tmp_path):
    p = _write(tmp_path, "x,lc,n\n1.0,c,0.0\n")
    with pytest.raises(NonPositiveTargetError):
        load_csv(p, "n", "lc")


def test_load_csv_errors(tmp_path):
    with pytest.raises(MissingColumnError):
        load_csv(_write(tmp_path, "x,lc\n1,c\n"), "n", "lc")
    with pytest.raises(CsvParseError):
        load_csv(_write(tmp_path, "x,lc,n\nfoo,c,1.0\n"), "n", "lc")
    with pytest.raises(DimensionMismatchError):
        load_csv(_write(tmp_path, "x,lc,n\n1.0,c\n"), "n", "lc")
    # infinities are not valid feature values
    with pytest.raises(CsvParseError):
        load_csv(_write(tmp_path, "x,lc,n\ninf,c,1.0\n"), "n", "lc")


def test_csv_round_trip(tmp_path, rng):
    vals = rng.uniform(size=(20, 3))
    vals[rng.uniform(size=vals.shape) < 0.2] = np.nan
    ds = Dataset(
        FeatureTable(vals, ("a", "b", "c")),
        TargetVector(rng.uniform(0.1, 5.0, size=20)),
        tuple(rng.choice(["crop", "grass"], size=20)),
        tuple(f"r{i}" for i in range(20)),
    )
    p = tmp_path / "round.csv"
    write_csv(ds, p)
    back = load_csv(p, "nitrogen", "landcover", "id")
    assert np.array_equal(back.features.values, ds.features.values, equal_nan=True)
    assert np.array_equal(back.target.values, ds.target.values)
    assert back.landcover == ds.landcover
    assert back.ids == ds.ids


def test_load_feature_csv_ignores_extras(tmp_path):
    p = _write(tmp_path, "junk,b,a,note\nxyz,2.0,1.0,hello\nzzz,4.0,3.0,there\n")
    ft, ids = load_feature_csv(p, ["a", "b"])
    assert ft.names == ("a", "b")
    assert ft.values.tolist() == [[1.0, 2.0], [3.0, 4.0]]
    assert ids is None
    with pytest.raises(MissingFeatureError):
        load_feature_csv(p, ["a", "zz"])
