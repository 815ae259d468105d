"""Laplacian updates with the data estimate held fixed, plus the two graph
initializers (covariance and k-nearest-neighbour)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import (
    GraphLaplacian,
    as_kernel,
    as_laplacian_matrix,
    as_mask,
    as_time_series,
)
from .errors import DimensionError, DivergenceError, UnderdeterminedVertexError


@dataclass(frozen=True, eq=False)
class ProjectionMask:
    """I - 1 1^T: zero diagonal, -1 elsewhere."""

    matrix: np.ndarray

    def __post_init__(self):
        M = np.asarray(self.matrix, dtype=np.float64)
        n = M.shape[0]
        if M.shape != (n, n) or not np.array_equal(M, np.eye(n) - np.ones((n, n))):
            raise ValueError("projection mask must equal I - 11^T")
        M = M.copy()
        M.setflags(write=False)
        object.__setattr__(self, "matrix", M)

    @classmethod
    def for_size(cls, n):
        return cls(np.eye(n) - np.ones((n, n)))


@dataclass(frozen=True)
class GraphLearnResult:
    laplacian: GraphLaplacian
    objective_trace: np.ndarray
    iterations_run: int


def _mask_for(n, mask):
    if mask is None:
        return ProjectionMask.for_size(n)
    if mask.matrix.shape[0] != n:
        raise DimensionError(f"projection mask is {mask.matrix.shape}, matrix has {n} rows")
    return mask


def project_to_laplacian(A, mask=None, *, use_numba=None):
    """Map any square matrix to a Laplacian.

    Off-diagonals are sign-flipped by the projection mask, clamped at zero,
    symmetrized, and the diagonal is rebuilt from the row sums.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"expected a square matrix, got {A.shape}")
    mask = _mask_for(A.shape[0], mask)
    return GraphLaplacian(_kernels.project_laplacian(A, mask.matrix, use_numba=use_numba))


def _filtered_covariance(x_hat, kernel):
    # X Z X^T, symmetrized
    S = kernel.right_multiply(x_hat) @ x_hat.T
    return 0.5 * (S + S.T)


def gl_gradient(x_hat, L, alpha, beta):
    """Gradient in L of Tr(X^T L X Z) + beta ||L||_F^2."""
    x_hat = as_time_series(x_hat, "x_hat")
    Lm = as_laplacian_matrix(L, x_hat.shape[0])
    Z = as_kernel(alpha, x_hat.shape[1])
    return _filtered_covariance(x_hat, Z) + 2.0 * beta * Lm


def gl_objective(x_hat, L, alpha, beta):
    x_hat = as_time_series(x_hat, "x_hat")
    Lm = as_laplacian_matrix(L, x_hat.shape[0])
    S = _filtered_covariance(x_hat, as_kernel(alpha, x_hat.shape[1]))
    return float(np.vdot(Lm, S)) + beta * float(np.vdot(Lm, Lm))


def _degree_floor(L):
    d = np.diag(L)
    pos = d[d > 0]
    if pos.size == 0:
        return L
    return L / pos.min()


def gl(y, x_hat, L0, alpha, k2, beta, eta, *, degree_floor=False, use_numba=None):
    """Projected gradient descent on the Laplacian for ``k2`` steps.

    ``y`` (the masked observations) is accepted for interface symmetry with
    the forward pass but the update depends only on ``x_hat``. The objective
    trace holds Tr(X^T L X Z) + beta ||L||_F^2 for L0 and every iterate.

    With ``degree_floor`` each iterate is rescaled so its smallest positive
    degree is 1.
    """
    x_hat = as_time_series(x_hat, "x_hat")
    if y is not None and np.shape(y) != x_hat.shape:
        raise DimensionError(f"y has shape {np.shape(y)}, x_hat has shape {x_hat.shape}")
    if not (eta > 0 and beta > 0):
        raise ValueError("eta and beta must be positive")
    n = x_hat.shape[0]
    Lm = as_laplacian_matrix(L0, n)
    S = _filtered_covariance(x_hat, as_kernel(alpha, x_hat.shape[1]))
    mask = ProjectionMask.for_size(n).matrix
    if not degree_floor:
        L, trace, status = _kernels.gl_pgd(S, Lm, mask, beta, eta, k2, use_numba=use_numba)
    else:
        L = Lm
        trace = [float(np.vdot(L, S)) + beta * float(np.vdot(L, L))]
        status = 0
        for _ in range(int(k2)):
            L = _kernels.project_laplacian(L - eta * (S + 2.0 * beta * L), mask,
                                           use_numba=use_numba)
            L = _degree_floor(L)
            trace.append(float(np.vdot(L, S)) + beta * float(np.vdot(L, L)))
            if not np.isfinite(trace[-1]):
                status = 1
                break
        trace = np.asarray(trace)
    if status or not np.all(np.isfinite(L)):
        raise DivergenceError(f"graph update produced non-finite values (eta={eta})")
    return GraphLearnResult(GraphLaplacian(L), np.asarray(trace), len(trace) - 1)


def pairwise_covariance(y, psi):
    """Sample covariance between vertex rows over co-observed timestamps.

    Pairs with fewer than two co-observed timestamps get 0.
    """
    y = as_time_series(y, "y")
    psi = as_mask(psi, y.shape)
    yk = y * psi
    n_co = psi @ psi.T
    s_i = yk @ psi.T  # s_i[a, b]: sum of row a over timestamps observed in both a and b
    s_ab = yk @ yk.T
    with np.errstate(divide="ignore", invalid="ignore"):
        C = (s_ab - s_i * s_i.T / n_co) / (n_co - 1.0)
    C[n_co < 2] = 0.0
    return 0.5 * (C + C.T)


def covariance_init(y, psi):
    """Graph whose edge weights are the positive pairwise covariances."""
    y = as_time_series(y, "y")
    psi = as_mask(psi, y.shape)
    counts = psi.sum(axis=1)
    bad = np.flatnonzero(counts < 2)
    if bad.size:
        raise UnderdeterminedVertexError(
            f"vertices {bad.tolist()} have fewer than 2 observed entries")
    W = np.maximum(pairwise_covariance(y, psi), 0.0)
    np.fill_diagonal(W, 0.0)
    return GraphLaplacian.from_weights(W)


def masked_distances(y, psi):
    """Euclidean distances between vertex rows using co-observed entries,
    scaled by M / (number of co-observed entries). Pairs with no overlap get
    ``inf``."""
    y = as_time_series(y, "y")
    psi = as_mask(psi, y.shape)
    m = y.shape[1]
    yk = y * psi
    sq = (yk * yk) @ psi.T
    n_co = psi @ psi.T
    d2 = sq + sq.T - 2.0 * (yk @ yk.T)
    d2 = np.maximum(d2, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        d2 = d2 * (m / n_co)
    d2[n_co == 0] = np.inf
    return np.sqrt(d2)


def knn_graph(y, psi, k):
    """Unweighted symmetrized k-nearest-neighbour graph over vertex rows.

    Ties go to the lower vertex index.
    """
    y = as_time_series(y, "y")
    n = y.shape[0]
    if not (1 <= k < n):
        raise ValueError(f"k must satisfy 1 <= k < N={n}, got {k}")
    D = masked_distances(y, psi)
    np.fill_diagonal(D, np.inf)
    W = np.zeros((n, n))
    for i in range(n):
        nbrs = np.argsort(D[i], kind="stable")[:k]
        W[i, nbrs] = 1.0
    W = np.maximum(W, W.T)
    np.fill_diagonal(W, 0.0)
    return GraphLaplacian.from_weights(W)
