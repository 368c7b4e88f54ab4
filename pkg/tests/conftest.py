import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from chemoflow import Grid

settings.register_profile("default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def grid2():
    return Grid((16, 12), (1.0, 0.75))


@pytest.fixture
def grid3():
    return Grid((8, 6, 7), (1.0, 0.75, 0.875))
