import numpy as np
import pytest

from randevol.fields import PeriodicGrid


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)


@pytest.fixture
def grid():
    return PeriodicGrid((256,), (1.0,))


@pytest.fixture
def grid_2pi():
    return PeriodicGrid((256,), (2.0 * np.pi,))


@pytest.fixture
def small_grid():
    return PeriodicGrid((32,), (1.0,))


@pytest.fixture
def grid_2d():
    return PeriodicGrid((32, 32), (1.0, 1.0))
