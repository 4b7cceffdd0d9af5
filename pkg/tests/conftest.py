import numpy as np
import pytest

from dtseg.synth import SynthParams, gen_crops


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_params():
    return SynthParams(side_range=(512, 600))


@pytest.fixture(scope="session")
def small_crops(small_params):
    return gen_crops(small_params, 4, seed=11)
