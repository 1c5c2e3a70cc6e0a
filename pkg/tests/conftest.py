import numpy as np
import pytest

from clebsch_mhd import recipes
from clebsch_mhd.clebsch import EquationOfState
from clebsch_mhd.spectral import Grid


@pytest.fixture(scope="session")
def grid8():
    return Grid.cube(8)


@pytest.fixture(scope="session")
def grid16():
    return Grid.cube(16)


@pytest.fixture(scope="session")
def grid24():
    return Grid.cube(24)


@pytest.fixture(scope="session")
def eos():
    return EquationOfState()


def random_state(grid, seed=0, **amps):
    return recipes.random_state(grid, recipes.RandomRecipe(seed=seed, **amps))


# a state with every Clebsch field active at moderate amplitude
STRONG = dict(phi0_amp=0.5, alpha_amp=0.5, sigma_amp=0.5, phi_amp=0.5, b_amp=0.3)
# the gauge fixture: strong enough for a measurable C3 flow error, resolved at 24^3
GAUGE = dict(alpha_amp=0.5, sigma_amp=0.8, phi_amp=0.8, b_amp=0.3)


@pytest.fixture(scope="session")
def state16(grid16):
    return random_state(grid16, seed=3, **STRONG)


@pytest.fixture(scope="session")
def gauge_state(grid24):
    return random_state(grid24, seed=1, **GAUGE)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(test_acceptance.RESULTS, key=lambda l: int(l.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
