import numpy as np
import pytest

from ssos import NoiseDistribution, simple_quadratic


@pytest.fixture
def quad():
    return simple_quadratic()


@pytest.fixture
def uniform1():
    return NoiseDistribution.uniform(1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
