import numpy as np
import pytest

from gsp_unroll import GraphLaplacian


def random_laplacian(rng, n, p=0.5, weighted=True):
    W = np.triu(rng.random((n, n)) < p, 1).astype(float)
    if weighted:
        W *= rng.uniform(0.1, 2.0, size=(n, n))
    return GraphLaplacian.from_weights(W + W.T)


def random_alpha(rng, k_poly=2):
    a = rng.uniform(0.0, 2.0, size=k_poly + 1)
    a[rng.integers(k_poly + 1)] += 0.1  # never all zero
    return a


def random_mask(rng, n, m, fraction=0.3):
    psi = (rng.random((n, m)) >= fraction).astype(float)
    psi[:, :2] = 1.0
    return psi


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
