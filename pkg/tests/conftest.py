import numpy as np
import pytest
from hypothesis import settings

from randnls import spectral

settings.register_profile("randnls", deadline=None, max_examples=25, derandomize=True)
settings.load_profile("randnls")


@pytest.fixture(scope="session")
def h1():
    """1D harmonic basis, 64 modes on 513 points."""
    grid = spectral.recommended_grid(1, 64, points_per_axis=513)
    return spectral.build_harmonic_basis(1, 64, grid)


@pytest.fixture(scope="session")
def h1_large():
    grid = spectral.build_grid(1, 4097, 512, margin=1.2)
    return spectral.build_harmonic_basis(1, 512, grid)


@pytest.fixture(scope="session")
def h2():
    grid = spectral.recommended_grid(2, 45)
    return spectral.build_harmonic_basis(2, 45, grid)


@pytest.fixture(scope="session")
def k4():
    return spectral.certified_basis_1d(spectral.PotentialSpec.smoothed_power(4), 200)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_coefficients(rng, n, decay=0.0):
    c = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return c / (1.0 + np.arange(np.shape(c)[-1])) ** decay


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
