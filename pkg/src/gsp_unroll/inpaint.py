"""Inpainting with the graph and temporal kernel held fixed.

Minimizes ``||psi * E - Y||_F^2 + lam * Tr(E^T L E Z)`` over E. The problem is
a convex quadratic whose normal equations are ``A(E) = Y`` with the
self-adjoint operator ``A(V) = psi * V + lam * L V Z``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import as_kernel, as_laplacian_matrix, as_mask, as_time_series, graph_variation
from .errors import DimensionError, DivergenceError, SingularSystemError
from .tolerances import EMD_RTOL


@dataclass(frozen=True)
class InpaintResult:
    x_hat: np.ndarray
    iterations_run: int
    final_gradient_norm: float
    objective_trace: np.ndarray


def _prepare(e, y, psi, L, alpha):
    y = as_time_series(y, "Y")
    if e is not None:
        e = as_time_series(e, "E")
        if e.shape != y.shape:
            raise DimensionError(f"E has shape {e.shape}, Y has shape {y.shape}")
    psi = as_mask(psi, y.shape)
    Lm = as_laplacian_matrix(L, y.shape[0])
    Z = as_kernel(alpha, y.shape[1])
    return e, y, psi, Lm, Z


def system_operator(v, psi, L, kernel, lam):
    """A(V) = psi * V + lam * L V Z."""
    return psi * v + lam * (L @ kernel.right_multiply(v))


def inpaint_objective(e, y, psi, L, alpha, lam):
    e, y, psi, Lm, Z = _prepare(e, y, psi, L, alpha)
    r = psi * e - y
    return float(np.vdot(r, r)) + lam * graph_variation(e, Lm, Z)


def inpaint_gradient(e, y, psi, L, alpha, lam):
    """Gradient of :func:`inpaint_objective` in E: 2(psi*E - Y) + 2 lam L E Z."""
    e, y, psi, Lm, Z = _prepare(e, y, psi, L, alpha)
    return 2.0 * (psi * e - y) + 2.0 * lam * (Lm @ Z.right_multiply(e))


def emd(y, psi, L, alpha, lam, k1, *, x0=None, rtol=EMD_RTOL, atol=0.0, use_numba=None):
    """Conjugate-gradient inpainting.

    Starts from ``x0`` (zeros by default), takes exact line-search steps along
    Fletcher-Reeves directions and stops after ``k1`` iterations or once the
    gradient norm drops to ``max(rtol * ||Y||_F, atol)``.

    ``y`` is masked by ``psi`` before solving, so entries of ``y`` at unknown
    positions are ignored.
    """
    _, y, psi, Lm, Z = _prepare(None, y, psi, L, alpha)
    y = psi * y
    if x0 is None:
        x0 = np.zeros_like(y)
    else:
        x0 = as_time_series(x0, "x0")
        if x0.shape != y.shape:
            raise DimensionError(f"x0 has shape {x0.shape}, Y has shape {y.shape}")
    if int(k1) < 0:
        raise ValueError("k1 must be nonnegative")
    tol = max(rtol * float(np.linalg.norm(y)), atol)
    x, iters, trace, status = _kernels.emd_cg(y, psi, Lm, Z.bands, lam, x0, k1, tol,
                                              use_numba=use_numba)
    if status or not np.all(np.isfinite(x)):
        raise DivergenceError(f"EMD produced non-finite values after {iters} iterations")
    grad = 2.0 * (system_operator(x, psi, Lm, Z, lam) - y)
    return InpaintResult(x, int(iters), float(np.linalg.norm(grad)), trace)


def direct_solve_oracle(y, psi, L, alpha, lam, *, cond_limit=1e12):
    """Solve ``(diag(vec psi) + lam (Z kron L)) vec X = vec Y`` densely.

    Column-major vectorization. Only meant for small problems (N*M <= 4096);
    raises :class:`SingularSystemError` when the system is singular or its
    condition number exceeds ``cond_limit``.
    """
    _, y, psi, Lm, Z = _prepare(None, y, psi, L, alpha)
    n, m = y.shape
    if n * m > 4096:
        raise ValueError(f"dense oracle limited to N*M <= 4096, got {n * m}")
    y = psi * y
    A = np.diag(psi.ravel(order="F")) + lam * np.kron(Z.matrix, Lm)
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > cond_limit:
        raise SingularSystemError(f"inpainting system is singular (cond={cond:.3g})")
    try:
        v = np.linalg.solve(A, y.ravel(order="F"))
    except np.linalg.LinAlgError as exc:  # pragma: no cover - caught by cond above
        raise SingularSystemError(str(exc)) from exc
    return v.reshape((n, m), order="F")
