import numpy as np
import pytest


def random_hermitian(d, rng):
    X = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return (X + X.conj().T) / 2


def random_psd(d, rng, rank=None):
    r = d if rank is None else rank
    G = rng.standard_normal((d, r)) + 1j * rng.standard_normal((d, r))
    return G @ G.conj().T


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
