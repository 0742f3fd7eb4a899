import numpy as np
import pytest

from cylwigner.cyl_core import CylDensity, CylState, Window


def random_state(rng, d, lo=None, sparse=False):
    """Normalised random state of support width ``d``; ``sparse`` zeroes interior entries at random."""
    if lo is None:
        lo = int(rng.integers(-4, 4))
    amps = rng.normal(size=d) + 1j * rng.normal(size=d)
    if sparse and d > 2:
        amps[1:-1] *= rng.random(d - 2) < 0.5
    return CylState(amps / np.linalg.norm(amps), Window(lo, lo + d - 1))


def random_density(rng, d, lo=0, rank=2):
    x = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    mat = x @ x.conj().T
    return CylDensity(mat / np.trace(mat).real, Window(lo, lo + d - 1))


def random_hermitian(rng, d):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return a + a.conj().T


@pytest.fixture
def rng():
    return np.random.default_rng(20240613)
