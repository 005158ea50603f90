import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_hermitian(rng, side):
    g = rng.standard_normal((side, side)) + 1j * rng.standard_normal((side, side))
    return (g + g.conj().T) / 2


def random_density(rng, side, rank=None):
    g = rng.standard_normal((side, rank or side)) + 1j * rng.standard_normal((side, rank or side))
    m = g @ g.conj().T
    return m / np.trace(m).real
