"""The unrolled network: alternating EMD / GL layers, the training loss, and
finite-difference training of the temporal-kernel coefficients."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .core import (
    AlphaParams,
    GraphLaplacian,
    as_alpha,
    as_mask,
    as_time_series,
    build_kernel,
    graph_variation,
)
from .errors import DimensionError, DivergenceError
from .graphlearn import covariance_init, gl
from .inpaint import emd

log = logging.getLogger(__name__)

LR_FLOOR = 1e-5


@dataclass(frozen=True)
class UnrollState:
    x_hat: np.ndarray
    laplacian: GraphLaplacian
    alpha: AlphaParams
    layer_index: int


@dataclass
class TrainTrace:
    loss_per_epoch: list = field(default_factory=list)
    alpha_per_epoch: list = field(default_factory=list)
    grad_norm_per_epoch: list = field(default_factory=list)

    def __len__(self):
        return len(self.loss_per_epoch)


def forward(y, psi, alpha, hp, *, L_init=None, use_numba=None):
    """Run ``hp.k_unroll`` layers of EMD followed by GL.

    The graph starts from the covariance graph of the observed entries unless
    ``L_init`` is given. With ``hp.warm_start`` each EMD call starts from the
    previous layer's estimate instead of zeros.
    """
    y = as_time_series(y, "y")
    psi = as_mask(psi, y.shape)
    y = psi * y
    alpha = as_alpha(alpha)
    Z = build_kernel(alpha, y.shape[1])
    L = covariance_init(y, psi) if L_init is None else L_init
    x_hat = None
    for layer in range(1, hp.k_unroll + 1):
        try:
            x0 = x_hat if hp.warm_start else None
            x_hat = emd(y, psi, L, Z, hp.lam, hp.k1, x0=x0, use_numba=use_numba).x_hat
            L = gl(y, x_hat, L, Z, hp.k2, hp.beta, hp.eta, use_numba=use_numba).laplacian
        except DivergenceError as exc:
            raise DivergenceError(str(exc), layer=layer, alpha=alpha.coeffs) from exc
    return UnrollState(x_hat, L, alpha, hp.k_unroll)


def loss(state, y, psi, hp):
    """Fidelity on known entries + lam * variation + beta ||L||^2 + gamma ||Z||^2."""
    y = as_time_series(y, "y")
    psi = as_mask(psi, y.shape)
    if state.x_hat.shape != y.shape:
        raise DimensionError(f"state has shape {state.x_hat.shape}, data has {y.shape}")
    Z = build_kernel(state.alpha, y.shape[1])
    r = psi * (y - state.x_hat)
    Lm = state.laplacian.matrix
    return (float(np.vdot(r, r))
            + hp.lam * graph_variation(state.x_hat, state.laplacian, Z)
            + hp.beta * float(np.vdot(Lm, Lm))
            + hp.gamma * Z.frobenius_sq())


def _loss_at(coeffs, y, psi, hp, use_numba):
    alpha = AlphaParams(coeffs)
    value = loss(forward(y, psi, alpha, hp, use_numba=use_numba), y, psi, hp)
    if not np.isfinite(value):
        raise DivergenceError("training loss is not finite", alpha=coeffs)
    return value


def fd_gradient(loss_fn, coeffs, f0=None):
    """Central differences with step 1e-3 * max(1, |a_i|).

    Coordinates too close to zero for a central step use a forward
    difference so every evaluation point stays nonnegative.
    """
    coeffs = np.asarray(coeffs, dtype=np.float64)
    g = np.zeros_like(coeffs)
    for i in range(coeffs.size):
        h = 1e-3 * max(1.0, abs(coeffs[i]))
        up = coeffs.copy()
        up[i] += h
        if coeffs[i] - h >= 0.0:
            down = coeffs.copy()
            down[i] -= h
            g[i] = (loss_fn(up) - loss_fn(down)) / (2.0 * h)
        else:
            base = loss_fn(coeffs) if f0 is None else f0
            g[i] = (loss_fn(up) - base) / h
    return g


def train_alpha(y, psi, alpha0, hp, *, grad_tol=1e-10, use_numba=None):
    """Projected gradient descent on alpha through the full forward pass.

    Each epoch evaluates the loss and its finite-difference gradient at the
    current alpha, then steps to ``max(0, alpha - lr * grad)``. The learning
    rate halves (down to 1e-5) whenever the loss goes up, and a step that
    would zero every coefficient is shortened. Returns the alpha with the
    lowest recorded loss together with the trace.
    """
    y = as_time_series(y, "y")
    psi = as_mask(psi, y.shape)
    y = psi * y
    alpha = as_alpha(alpha0)
    if alpha.k_poly != hp.k_poly:
        raise DimensionError(f"alpha has {alpha.coeffs.size} coefficients, "
                             f"k_poly={hp.k_poly} needs {hp.k_poly + 1}")
    trace = TrainTrace()
    if hp.train_epochs == 0:
        return alpha, trace

    def loss_fn(c):
        return _loss_at(c, y, psi, hp, use_numba)

    lr = hp.train_lr
    coeffs = alpha.coeffs.copy()
    current = loss_fn(coeffs)
    for epoch in range(hp.train_epochs):
        grad = fd_gradient(loss_fn, coeffs, f0=current)
        gnorm = float(np.linalg.norm(grad))
        trace.loss_per_epoch.append(current)
        trace.alpha_per_epoch.append(AlphaParams(coeffs))
        trace.grad_norm_per_epoch.append(gnorm)
        log.debug("epoch %d loss %.6g alpha %s |grad| %.3g", epoch, current, coeffs, gnorm)
        if gnorm < grad_tol or epoch == hp.train_epochs - 1:
            break
        step = lr
        candidate = np.maximum(coeffs - step * grad, 0.0)
        while not np.any(candidate > 0.0):
            step *= 0.5
            candidate = np.maximum(coeffs - step * grad, 0.0)
        new = loss_fn(candidate)
        if new > current:
            lr = max(lr * 0.5, LR_FLOOR)
        coeffs, current = candidate, new
    best = int(np.argmin(trace.loss_per_epoch))
    return trace.alpha_per_epoch[best], trace
