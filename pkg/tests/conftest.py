import math

import pytest

from lattice_model import DriveSchedule, LatticeParams
from propagator import PropagationConfig
from spectral_grid import make_grid
from stationary_states import solve_static

OMEGA = 2 * math.pi * 4990.0


@pytest.fixture(scope="session")
def small_grid():
    """9 wells on 1024 points; spectral accuracy is the same as production"""
    return make_grid(9, 64, rounding="auto")


@pytest.fixture(scope="session")
def reference_params():
    return LatticeParams.rb85()


@pytest.fixture(scope="session")
def reference_basis(reference_params, small_grid):
    return solve_static(reference_params, small_grid)


@pytest.fixture(scope="session")
def deep_basis(small_grid):
    """r=40 keeps a localized third state in the central well"""
    return solve_static(LatticeParams(r=40.0, s=2.86), small_grid)


@pytest.fixture
def fast_propagation():
    return PropagationConfig(steps_per_period=64)


@pytest.fixture
def reference_drive():
    return DriveSchedule(a_pm=0.14, a_am=0.10, omega=OMEGA, n=4)
