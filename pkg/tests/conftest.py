import numpy as np
import pytest

from soilnitro import (
    FeatureTable,
    GbdtParams,
    SynthSpec,
    bin_features,
    generate,
    train_gbdt,
    transform_target,
)


@pytest.fixture(scope="session")
def small_synth():
    """3k-row synthetic dataset with transformed target, shared across tests."""
    ds = generate(SynthSpec(n_rows=3000, n_informative=6, n_noise=6, noise_sd=0.25,
                            class_mix={"cropland": 0.65, "grassland": 0.35}, seed=11))
    return ds.with_target(transform_target(ds.target))


@pytest.fixture(scope="session")
def small_model(small_synth):
    ds = small_synth
    binned = bin_features(ds.features, 128)
    return train_gbdt(binned, ds.target.values,
                      GbdtParams(n_trees=80, max_depth=4, seed=5),
                      feature_names=ds.features.names)


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
