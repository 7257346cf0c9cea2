import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_spd(rng, n, shift=1.0):
    a = rng.standard_normal((n, n))
    p = a @ a.T + shift * np.eye(n)
    return 0.5 * (p + p.T)


@pytest.fixture
def random_spd(rng):
    """Builder for well-conditioned SPD matrices from the seeded generator."""
    return lambda n, shift=1.0: make_spd(rng, n, shift)
