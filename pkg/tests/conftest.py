import math

import numpy as np
import pytest

from fkup.potential import PairPotentialSpec, WeakPotential, default_potential
from fkup.profile import heteroclinic_profile


@pytest.fixture(scope="session")
def pot():
    return default_potential()


@pytest.fixture(scope="session")
def profile(pot):
    return heteroclinic_profile(pot)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def direct_w(xi, spec, radius):
    """Plain-Python lattice sum over |j| <= radius, used as an independent oracle."""

    def V(r):
        return spec.well_depth * ((spec.r_min / r) ** 12 - 2.0 * (spec.r_min / r) ** 6)

    def h(d):
        return V(math.sqrt(d * d + spec.standoff**2))

    return math.fsum(
        h((j + 0.5 + xi) / spec.sigma) - h((j + 0.5) / spec.sigma)
        for j in range(-radius, radius + 1)
    )


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
