import numpy as np
import pytest

from nilflow.generators import filiform, heisenberg, random_two_step, rescale_to_norm


@pytest.fixture
def rng():
    return np.random.default_rng(20260815)


@pytest.fixture
def heis():
    return heisenberg(1.0)


@pytest.fixture
def heis_sphere():
    """Heisenberg rescaled onto the sphere |mu| = 2 (scal = -1)."""
    return rescale_to_norm(heisenberg(1.0), 2.0)


@pytest.fixture
def fil4():
    return filiform(4)


def random_sphere_bracket(n, seed):
    """Random 2-step bracket on the |mu| = 2 sphere, reproducible by seed."""
    return rescale_to_norm(random_two_step(n, np.random.default_rng(seed)), 2.0)
