"""Shared math: data validation, temporal differences, the temporal kernel
Z(alpha), graph variation and Laplacian validation."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import sparse

from . import _kernels
from .errors import DimensionError, LaplacianError
from .tolerances import CONSTRUCTION_TOL, PSD_RTOL


def _readonly(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


# ---------------------------------------------------------------------------
# data matrices and masks
# ---------------------------------------------------------------------------


def as_time_series(x, name="X"):
    """Validate an N x M data matrix (vertices x timestamps) and return it as
    a float64 array."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {x.shape}")
    n, m = x.shape
    if n < 1:
        raise DimensionError(f"{name} needs at least one vertex")
    if m < 2:
        raise DimensionError(f"{name} needs at least two timestamps, got M={m}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite entries")
    return x


def as_mask(psi, shape=None):
    """Validate a binary known-entry mask (1 = observed)."""
    psi = np.asarray(psi, dtype=np.float64)
    if psi.ndim != 2:
        raise DimensionError(f"mask must be 2-D, got shape {psi.shape}")
    if shape is not None and psi.shape != tuple(shape):
        raise DimensionError(f"mask shape {psi.shape} does not match data shape {tuple(shape)}")
    if not np.all((psi == 0.0) | (psi == 1.0)):
        raise ValueError("mask entries must be exactly 0 or 1")
    return psi


# ---------------------------------------------------------------------------
# parameter containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AlphaParams:
    """Nonnegative temporal-kernel coefficients (alpha_0, ..., alpha_k)."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=np.float64))
        if c.ndim != 1 or c.size < 1:
            raise ValueError("alpha must be a non-empty vector")
        if not np.all(np.isfinite(c)):
            raise ValueError("alpha must be finite")
        if np.any(c < 0):
            raise ValueError(f"alpha must be nonnegative, got {c.tolist()}")
        if not np.any(c > 0):
            raise ValueError("alpha must not be all zero")
        object.__setattr__(self, "coeffs", _readonly(c))

    @property
    def k_poly(self):
        return self.coeffs.size - 1

    def __len__(self):
        return self.coeffs.size

    def __iter__(self):
        return iter(self.coeffs.tolist())

    def __eq__(self, other):
        if not isinstance(other, AlphaParams):
            return NotImplemented
        return np.array_equal(self.coeffs, other.coeffs)

    def __hash__(self):
        return hash(self.coeffs.tobytes())

    def __repr__(self):
        return f"AlphaParams({self.coeffs.tolist()})"

    @classmethod
    def identity(cls, k_poly=0):
        """alpha = e_0, i.e. Z = I."""
        c = np.zeros(k_poly + 1)
        c[0] = 1.0
        return cls(c)


def as_alpha(alpha):
    return alpha if isinstance(alpha, AlphaParams) else AlphaParams(alpha)


@dataclass(frozen=True)
class Hyperparams:
    """Solver and training settings.

    ``k_unroll`` outer layers, each running ``k1`` CG iterations and ``k2``
    graph-update steps. ``lam`` weights the graph variation, ``beta`` the
    Frobenius penalty on L, ``gamma`` the Frobenius penalty on Z.
    """

    k_unroll: int = 5
    k1: int = 50
    k2: int = 20
    eta: float = 1e-3
    beta: float = 0.1
    gamma: float = 1e-3
    lam: float = 1.0
    k_poly: int = 2
    train_lr: float = 1e-2
    train_epochs: int = 30
    warm_start: bool = True

    def __post_init__(self):
        for name in ("k_unroll", "k1", "k2", "k_poly", "train_epochs"):
            v = getattr(self, name)
            if int(v) != v or v < (0 if name == "train_epochs" else 1):
                raise ValueError(f"{name} must be a positive integer, got {v}")
        for name in ("eta", "beta", "gamma", "lam", "train_lr"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be a positive real, got {v}")

    def replace(self, **changes):
        from dataclasses import replace

        return replace(self, **changes)


# ---------------------------------------------------------------------------
# temporal operators
# ---------------------------------------------------------------------------


def temporal_difference(x):
    """Successive column differences: column j is x[:, j+1] - x[:, j]."""
    x = as_time_series(x)
    return x[:, 1:] - x[:, :-1]


@lru_cache(maxsize=64)
def _difference_operator(m):
    D = np.zeros((m, m - 1))
    idx = np.arange(m - 1)
    D[idx, idx] = -1.0
    D[idx + 1, idx] = 1.0
    D.setflags(write=False)
    return D


def difference_operator(m):
    """M x (M-1) matrix Delta with ``X @ Delta == temporal_difference(X)``."""
    m = int(m)
    if m < 2:
        raise DimensionError(f"difference operator needs M >= 2, got {m}")
    return _difference_operator(m)


@lru_cache(maxsize=64)
def _gram_powers(m, k):
    # (Delta Delta^T)^i for i = 0..k, by repeated multiplication
    D = _difference_operator(m)
    base = D @ D.T
    powers = [np.eye(m)]
    for _ in range(k):
        powers.append(powers[-1] @ base)
    for p in powers:
        p.setflags(write=False)
    return tuple(powers)


def gram_powers(m, k):
    """Tuple of (Delta Delta^T)^i, i = 0..k, cached per (M, k)."""
    if m < 2:
        raise DimensionError(f"M must be >= 2, got {m}")
    return _gram_powers(int(m), int(k))


@lru_cache(maxsize=64)
def _gram_power_bands(m, k):
    # bands of (Delta Delta^T)^i, i = 0..k, shape (k + 1, k + 1, m); sparse
    # repeated multiplication keeps this O(m k^2)
    D = sparse.csr_matrix(_difference_operator(m))
    base = (D @ D.T).tocsr()
    out = np.zeros((k + 1, k + 1, m))
    P = sparse.identity(m, format="csr")
    for i in range(k + 1):
        if i:
            P = (P @ base).tocsr()
        for d in range(min(i, m - 1) + 1):
            out[i, d, : m - d] = P.diagonal(d)
    out.setflags(write=False)
    return out


def _bands_to_dense(bands):
    m = bands.shape[1]
    Z = np.zeros((m, m))
    for d in range(min(bands.shape[0], m)):
        v = bands[d, : m - d]
        Z += np.diag(v, d)
        if d:
            Z += np.diag(v, -d)
    return Z


def _dense_to_bands(Z):
    m = Z.shape[0]
    bands = np.zeros((m, m))
    for d in range(m):
        bands[d, : m - d] = np.diagonal(Z, offset=d)
    return bands


class TemporalKernel:
    """Symmetric banded M x M matrix Z, stored by its diagonals.

    ``bands[d, j] = Z[j, j + d]``; the dense ``matrix`` is built on first
    access.
    """

    def __init__(self, bands, alpha=None):
        bands = np.array(bands, dtype=np.float64)
        if bands.ndim != 2 or bands.shape[0] < 1:
            raise DimensionError(f"bands must be 2-D, got shape {bands.shape}")
        bands.setflags(write=False)
        self.bands = bands
        self.alpha = alpha
        self._matrix = None

    @classmethod
    def from_matrix(cls, Z):
        Z = np.asarray(Z, dtype=np.float64)
        if Z.ndim != 2 or Z.shape[0] != Z.shape[1]:
            raise DimensionError(f"kernel must be square, got {Z.shape}")
        if not np.array_equal(Z, Z.T):
            raise ValueError("kernel must be exactly symmetric")
        return cls(_dense_to_bands(Z))

    @property
    def size(self):
        return self.bands.shape[1]

    @property
    def matrix(self):
        if self._matrix is None:
            self._matrix = _readonly(_bands_to_dense(self.bands))
        return self._matrix

    def frobenius_sq(self):
        b = self.bands
        return float(np.sum(b[0] ** 2) + 2.0 * np.sum(b[1:] ** 2))

    def is_psd(self, rtol=PSD_RTOL):
        w = np.linalg.eigvalsh(self.matrix)
        scale = max(abs(w[0]), abs(w[-1]))
        return bool(w[0] >= -rtol * scale)

    def right_multiply(self, x, use_numba=None):
        """Return ``x @ Z`` using the banded structure."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.size:
            raise DimensionError(f"cannot multiply {x.shape} by {self.size}x{self.size} kernel")
        return _kernels.banded_matmul(x, self.bands, use_numba=use_numba)

    def __repr__(self):
        return f"TemporalKernel(M={self.size}, alpha={self.alpha!r})"


def build_kernel(alpha, m):
    """Z(alpha) = alpha_0 I + sum_i alpha_i (Delta Delta^T)^i."""
    alpha = as_alpha(alpha)
    m = int(m)
    if m < 2:
        raise DimensionError(f"M must be >= 2, got {m}")
    power_bands = _gram_power_bands(m, alpha.k_poly)
    bands = np.tensordot(alpha.coeffs, power_bands, axes=1)
    return TemporalKernel(bands, alpha=alpha)


def as_kernel(alpha_or_kernel, m):
    if isinstance(alpha_or_kernel, TemporalKernel):
        if alpha_or_kernel.size != m:
            raise DimensionError(f"kernel size {alpha_or_kernel.size} != M={m}")
        return alpha_or_kernel
    return build_kernel(alpha_or_kernel, m)


# ---------------------------------------------------------------------------
# Laplacians
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GraphLaplacian:
    """Combinatorial Laplacian L = diag(W 1) - W of a nonnegative weighting.

    Build one with :meth:`from_weights` or :func:`validate_laplacian`; the
    constructor itself only re-checks the invariants.
    """

    matrix: np.ndarray

    def __post_init__(self):
        L = np.asarray(self.matrix, dtype=np.float64)
        _check_laplacian(L, CONSTRUCTION_TOL, exact_symmetry=True)
        object.__setattr__(self, "matrix", _readonly(L))

    @classmethod
    def from_weights(cls, W):
        W = np.array(W, dtype=np.float64)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise DimensionError(f"weight matrix must be square, got {W.shape}")
        if np.any(W < 0):
            raise ValueError("edge weights must be nonnegative")
        W = 0.5 * (W + W.T)
        np.fill_diagonal(W, 0.0)
        L = -W
        np.fill_diagonal(L, W.sum(axis=1))
        return cls(L)

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros((n, n)))

    @property
    def n_vertices(self):
        return self.matrix.shape[0]

    @property
    def weights(self):
        W = -self.matrix.copy()
        np.fill_diagonal(W, 0.0)
        return W

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, GraphLaplacian):
            return NotImplemented
        return np.array_equal(self.matrix, other.matrix)

    __hash__ = None


def _check_laplacian(A, tol, exact_symmetry=False):
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise LaplacianError("shape", f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise LaplacianError("finite", "matrix has non-finite entries")
    asym = np.max(np.abs(A - A.T)) if A.size else 0.0
    if (exact_symmetry and asym != 0.0) or asym > tol:
        i, j = np.unravel_index(np.argmax(np.abs(A - A.T)), A.shape)
        raise LaplacianError("symmetry", f"A[{i},{j}]={A[i, j]!r} but A[{j},{i}]={A[j, i]!r}")
    off = A - np.diag(np.diag(A))
    if np.any(off > tol):
        i, j = np.unravel_index(np.argmax(off), A.shape)
        raise LaplacianError("off_diagonal_sign", f"positive off-diagonal A[{i},{j}]={A[i, j]!r}")
    rows = A.sum(axis=1)
    scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
    if np.any(np.abs(rows) > tol * scale):
        i = int(np.argmax(np.abs(rows)))
        raise LaplacianError("row_sum", f"row {i} sums to {rows[i]!r}")


def validate_laplacian(A, tol=CONSTRUCTION_TOL):
    """Accept ``A`` as a Laplacian if it is one to within ``tol``.

    On success the result is exactly symmetric with exact zero row sums (up
    to float summation). Failures raise :class:`LaplacianError` naming the
    first violated property, checked in the order shape, finiteness,
    symmetry, off-diagonal sign, row sums.
    """
    if isinstance(A, GraphLaplacian):
        return A
    A = np.asarray(A, dtype=np.float64)
    _check_laplacian(A, tol)
    W = -0.5 * (A + A.T)
    np.fill_diagonal(W, 0.0)
    return GraphLaplacian.from_weights(np.maximum(W, 0.0))


def as_laplacian_matrix(L, n=None):
    M = L.matrix if isinstance(L, GraphLaplacian) else validate_laplacian(L).matrix
    if n is not None and M.shape[0] != n:
        raise DimensionError(f"Laplacian has {M.shape[0]} vertices, data has {n}")
    return M


# ---------------------------------------------------------------------------
# graph variation
# ---------------------------------------------------------------------------


def graph_variation(x, L, alpha):
    """Tr(X^T L X Z(alpha)); ``alpha`` may also be a prebuilt kernel."""
    x = as_time_series(x)
    Lm = as_laplacian_matrix(L, x.shape[0])
    Z = as_kernel(alpha, x.shape[1])
    return float(np.sum((Lm @ x) * Z.right_multiply(x)))
