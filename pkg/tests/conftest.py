import numpy as np
import pytest

from kgdecay.benchmarks import tuned_gaussian
from kgdecay.spectral import PotentialSpec, build_grid, spectrum


@pytest.fixture(scope="session")
def spec_n1():
    """Gaussian well with omega = 0.4, m = 1 (N = 1 window), small grid."""
    return tuned_gaussian(60.0, 300, 0.4)


@pytest.fixture(scope="session")
def spec_n2():
    """Gaussian well with omega = 0.27, m = 1 (N = 2 window), small grid."""
    return tuned_gaussian(60.0, 300, 0.27)


@pytest.fixture(scope="session")
def square_well():
    grid = build_grid(30.0, 600)
    return spectrum(grid, PotentialSpec("square_well", 1.0, depth=4.0, radius=1.0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
