import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from khmlab.grid import Grid

settings.register_profile("khmlab", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("khmlab")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def grid16():
    return Grid(16)


@pytest.fixture
def grid32():
    return Grid(32)
