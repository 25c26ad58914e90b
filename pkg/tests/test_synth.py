from collections import Counter

import numpy as np
import pytest

from soilnitro import (
    ExtraTreesParams,
    SynthSpec,
    generate,
    latent_response,
    oracle_r2_ceiling,
    predict,
    train_extratrees,
    transform_target,
)
from soilnitro.errors import InvalidSpecError
from soilnitro.synth import informative_names


def test_default_spec_matches_survey_shape():
    ds = generate(SynthSpec(seed=1))
    assert ds.n_rows == 21244
    assert ds.features.n_cols == 84
    counts = Counter(ds.landcover)
    assert counts["cropland"] == 13937
    assert counts["grassland"] == 7307


def test_generation_deterministic():
    spec = SynthSpec(n_rows=500, n_informative=5, n_noise=3, missing_rate=0.05, seed=9)
    a, b = generate(spec), generate(spec)
    assert np.array_equal(a.features.values, b.features.values, equal_nan=True)
    assert np.array_equal(a.target.values, b.target.values)
    assert a.landcover == b.landcover
    c = generate(SynthSpec(n_rows=500, n_informative=5, n_noise=3, missing_rate=0.05, seed=10))
    assert not np.array_equal(a.target.values, c.target.values)


def test_targets_strictly_positive():
    for seed in range(3):
        ds = generate(SynthSpec(n_rows=2000, noise_sd=1.0, seed=seed))
        assert ds.target.values.min() > 0.0


def test_class_counts_within_rounding():
    spec = SynthSpec(n_rows=1001, class_mix={"a": 1 / 3, "b": 1 / 3, "c": 1 / 3}, seed=2)
    counts = Counter(generate(spec).landcover)
    assert sum(counts.values()) == 1001
    for c in "abc":
        assert abs(counts[c] - 1001 / 3) <= 1.0


def test_missing_rate_applied():
    ds = generate(SynthSpec(n_rows=3000, missing_rate=0.1, seed=3))
    frac = np.isnan(ds.features.values).mean()
    assert 0.08 < frac < 0.12
    assert np.isfinite(ds.target.values).all()


def test_invalid_specs():
    with pytest.raises(InvalidSpecError):
        SynthSpec(n_rows=0).validate()
    with pytest.raises(InvalidSpecError):
        SynthSpec(class_mix={"a": 0.5, "b": 0.6}).validate()
    with pytest.raises(InvalidSpecError):
        SynthSpec(missing_rate=1.0).validate()
    with pytest.raises(InvalidSpecError):
        SynthSpec(noise_sd=-1.0).validate()


def test_ceiling_trivial_and_monotone():
    assert oracle_r2_ceiling(SynthSpec(noise_sd=0.0)) == 1.0
    c1 = oracle_r2_ceiling(SynthSpec(noise_sd=0.3))
    c2 = oracle_r2_ceiling(SynthSpec(noise_sd=0.6))
    assert c2 < c1 < 1.0


def test_ceiling_half_when_noise_matches_signal():
    # measure the signal variance, then set noise to match it
    spec0 = SynthSpec(n_rows=200_000, noise_sd=0.0, seed=123)
    ds = generate(spec0)
    z = transform_target(ds.target).values
    sd = float(np.std(z))
    ceiling = oracle_r2_ceiling(SynthSpec(noise_sd=sd))
    assert ceiling == pytest.approx(0.5, abs=0.02)


def test_default_ceiling_near_085():
    assert oracle_r2_ceiling(SynthSpec()) == pytest.approx(0.85, abs=0.01)


def test_noiseless_interpolation():
    # zero response noise: deep unrestricted extra trees reproduce the data
    spec = SynthSpec(n_rows=1500, n_informative=5, n_noise=2, noise_sd=0.0, seed=4)
    ds = generate(spec)
    ds_t = ds.with_target(transform_target(ds.target))
    model = train_extratrees(ds_t.features, ds_t.target.values,
                             ExtraTreesParams(n_trees=40, min_samples_leaf=1, seed=0))
    preds = predict(model, ds_t.features)
    y = ds_t.target.values
    ss = 1 - np.sum((y - preds) ** 2) / np.sum((y - y.mean()) ** 2)
    assert ss >= 0.99


def test_latent_function_is_pure_and_matches_generation():
    spec = SynthSpec(n_rows=800, n_informative=6, n_noise=4, noise_sd=0.0, seed=8)
    ds = generate(spec)
    x_inf = ds.features.values[:, :6]
    z = latent_response(x_inf, ds.landcover, class_names=spec.class_mix.keys())
    assert np.allclose(np.log(100 * ds.target.values), z, atol=1e-12)
    names = informative_names(spec)
    assert ds.features.names[:6] == names


def test_class_offset_separates_landcovers():
    # classes are bands of the last informative feature; the mean gap is the
    # 0.55 offset plus the banding feature's linear-term contribution:
    # 0.45 * (E[x | top 34.4%] - E[x | bottom 65.6%]) = 0.45 * 0.5 = 0.225
    spec = SynthSpec(n_rows=4000, noise_sd=0.0, seed=5)
    ds = generate(spec)
    z = np.log(100 * ds.target.values)
    crop = z[np.asarray(ds.landcover) == "cropland"].mean()
    grass = z[np.asarray(ds.landcover) == "grassland"].mean()
    assert grass - crop == pytest.approx(0.775, abs=0.05)


def test_labels_are_bands_of_last_informative_feature():
    spec = SynthSpec(n_rows=1000, n_informative=4, n_noise=2, seed=6)
    ds = generate(spec)
    v = ds.features.values[:, 3]
    crop_max = v[np.asarray(ds.landcover) == "cropland"].max()
    grass_min = v[np.asarray(ds.landcover) == "grassland"].min()
    assert crop_max <= grass_min
