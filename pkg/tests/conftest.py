import numpy as np
import pytest

from irsjam.channel import crandn, generate_channels
from irsjam.scenario import default_scenario


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def desk():
    return default_scenario()


@pytest.fixture(scope="session")
def desk_channels(desk):
    return generate_channels(desk, 0)


def random_beams(rng, n, p1=1.0, p2=1.0):
    f1 = crandn(rng, n)
    f2 = crandn(rng, n)
    return f1 * np.sqrt(p1) / np.linalg.norm(f1), f2 * np.sqrt(p2) / np.linalg.norm(f2)


def random_refl(rng, m):
    return np.exp(1j * rng.uniform(0, 2 * np.pi, m))
