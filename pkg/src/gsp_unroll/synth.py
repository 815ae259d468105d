"""Synthetic graphs, graph-smooth time series, masks and noise."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.fft import dct, idct
from scipy.sparse.csgraph import connected_components

from .core import AlphaParams, GraphLaplacian, as_alpha, as_time_series
from .errors import InfeasibleMaskError
from .tolerances import PINV_RTOL

MAX_GRAPH_RETRIES = 100
MIN_OBSERVED_PER_ROW = 2


@dataclass(frozen=True)
class SynthConfig:
    n_vertices: int = 20
    n_timestamps: int = 500
    edge_prob: float = 0.3
    alpha_true: AlphaParams = AlphaParams([1.0, 4.0, 1.66])
    seed: int = 0

    def __post_init__(self):
        if self.n_vertices < 2:
            raise ValueError("need at least 2 vertices")
        if self.n_timestamps < 2:
            raise ValueError("need at least 2 timestamps")
        if not 0.0 < self.edge_prob < 1.0:
            raise ValueError("edge_prob must lie in (0, 1)")
        object.__setattr__(self, "alpha_true", as_alpha(self.alpha_true))


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def is_connected(W):
    n_comp, _ = connected_components(np.asarray(W) != 0, directed=False)
    return n_comp == 1


def er_graph(n, p, seed=None, max_retries=MAX_GRAPH_RETRIES):
    """Connected unweighted Erdos-Renyi graph, resampled until connected."""
    if n < 2:
        raise ValueError("n must be >= 2")
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    rng = _rng(seed)
    iu = np.triu_indices(n, k=1)
    for _ in range(max_retries):
        W = np.zeros((n, n))
        W[iu] = rng.random(iu[0].size) < p
        W = W + W.T
        if is_connected(W):
            return GraphLaplacian.from_weights(W)
    raise RuntimeError(f"no connected G({n}, {p}) sample in {max_retries} tries")


def kernel_eigenvalues(alpha, m):
    """Eigenvalues of Z(alpha) in the DCT-II basis.

    Delta Delta^T is the Laplacian of a path on ``m`` nodes, diagonalized by
    the orthonormal DCT-II with eigenvalues 2 - 2 cos(pi k / m).
    """
    alpha = as_alpha(alpha)
    lam = 2.0 - 2.0 * np.cos(np.pi * np.arange(m) / m)
    return np.polynomial.polynomial.polyval(lam, alpha.coeffs)


def apply_kernel_pinv_sqrt(x, alpha):
    """``x @ Z(alpha)^{+1/2}`` through the DCT, without forming Z."""
    x = as_time_series(x)
    w = kernel_eigenvalues(alpha, x.shape[1])
    cutoff = PINV_RTOL * max(w.max(), 0.0)
    scale = np.zeros_like(w)
    keep = w > cutoff
    scale[keep] = 1.0 / np.sqrt(w[keep])
    return idct(dct(x, type=2, norm="ortho", axis=1) * scale, type=2, norm="ortho", axis=1)


def gsd(config):
    """Draw (X, L): graph-smooth columns, temporally colored by Z^(+1/2).

    Returns the data matrix ``X Z(alpha_true)^{+1/2}`` and the Laplacian used
    to generate it.
    """
    graph_seq, data_seq = np.random.SeedSequence(config.seed).spawn(2)
    L = er_graph(config.n_vertices, config.edge_prob, np.random.default_rng(graph_seq))
    rng = np.random.default_rng(data_seq)
    sigma, U = np.linalg.eigh(L.matrix)
    std = np.zeros_like(sigma)
    keep = sigma > PINV_RTOL * sigma[-1]
    std[keep] = 1.0 / np.sqrt(sigma[keep])
    Y = std[:, None] * rng.standard_normal((config.n_vertices, config.n_timestamps))
    X = U @ Y
    return apply_kernel_pinv_sqrt(X, config.alpha_true), L


def sample_mask(n, m, missing_fraction, seed=None, max_tries=100):
    """Binary mask with exactly ``round(missing_fraction * n * m)`` zeros.

    Positions are uniform subject to every row keeping at least two observed
    entries. Rejection sampling is tried first; if it keeps failing, rows
    below the floor borrow observations from rows with slack.
    """
    if not 0.0 <= missing_fraction < 1.0:
        raise ValueError("missing_fraction must lie in [0, 1)")
    total = n * m
    n_missing = int(round(missing_fraction * total))
    if m < MIN_OBSERVED_PER_ROW or n_missing > total - MIN_OBSERVED_PER_ROW * n:
        raise InfeasibleMaskError(
            f"cannot hide {n_missing} of {total} entries and keep "
            f"{MIN_OBSERVED_PER_ROW} observed per row")
    rng = _rng(seed)
    for _ in range(max_tries):
        flat = np.ones(total)
        flat[rng.choice(total, size=n_missing, replace=False)] = 0.0
        psi = flat.reshape(n, m)
        if np.all(psi.sum(axis=1) >= MIN_OBSERVED_PER_ROW):
            return psi
    # repair: move missing entries out of deficient rows
    for i in np.flatnonzero(psi.sum(axis=1) < MIN_OBSERVED_PER_ROW):
        while psi[i].sum() < MIN_OBSERVED_PER_ROW:
            j = rng.choice(np.flatnonzero(psi[i] == 0))
            donors = np.flatnonzero(psi.sum(axis=1) > MIN_OBSERVED_PER_ROW)
            r = rng.choice(donors)
            c = rng.choice(np.flatnonzero(psi[r] == 1))
            psi[i, j], psi[r, c] = 1.0, 0.0
    return psi


def add_noise(x, snr_db, seed=None):
    """Add white Gaussian noise with expected power ||X||^2 / 10^(snr_db/10)."""
    x = as_time_series(x)
    power = float(np.mean(x * x))
    if power == 0.0:
        raise ValueError("cannot set an SNR relative to an all-zero signal")
    sigma = np.sqrt(power) * 10.0 ** (-snr_db / 20.0)
    return x + sigma * _rng(seed).standard_normal(x.shape)
