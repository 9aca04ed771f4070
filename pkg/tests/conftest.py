import numpy as np
import pytest
from hypothesis import settings

from cbftk.systems import bicycle_scenario, pendulum_scenario

settings.register_profile("pkg", deadline=None, max_examples=100)
settings.load_profile("pkg")


@pytest.fixture(scope="session")
def pendulum():
    return pendulum_scenario()


@pytest.fixture(scope="session")
def bicycle():
    return bicycle_scenario()


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)


def central_difference(func, x, step=1e-6):
    """Finite-difference gradient oracle, independent of the AD path."""
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.size)
    for i in range(x.size):
        delta = np.zeros(x.size)
        delta[i] = step
        out[i] = (func(x + delta) - func(x - delta)) / (2.0 * step)
    return out
