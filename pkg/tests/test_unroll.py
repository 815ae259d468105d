import numpy as np
import pytest

from gsp_unroll import (
    AlphaParams,
    GraphLaplacian,
    Hyperparams,
    SynthConfig,
    UnrollState,
    build_kernel,
    covariance_init,
    emd,
    forward,
    gl,
    graph_variation,
    gsd,
    loss,
    normalized_error,
    sample_mask,
    train_alpha,
)
from gsp_unroll.core import gram_powers
from gsp_unroll.errors import DimensionError, DivergenceError
from gsp_unroll.unroll import fd_gradient

from conftest import random_alpha, random_laplacian, random_mask

FAST = Hyperparams(k_unroll=2, k1=20, k2=5, train_epochs=4)


def small_problem(rng, n=6, m=12):
    x = rng.standard_normal((n, m))
    psi = random_mask(rng, n, m)
    return psi * x, psi


# --- loss --------------------------------------------------------------------

def test_loss_closed_form_empty_state(rng):
    y, psi = small_problem(rng)
    hp = Hyperparams(gamma=0.25)
    state = UnrollState(np.zeros_like(y), GraphLaplacian.zeros(6), AlphaParams([2.0, 0.0, 0.0]), 0)
    assert loss(state, y, psi, hp) == pytest.approx(np.sum(y * y) + 0.25 * 4.0 * 12, rel=1e-14)


def test_loss_gamma_term_identity_kernel():
    z = np.zeros((3, 7))
    state = UnrollState(z, GraphLaplacian.zeros(3), AlphaParams.identity(2), 0)
    assert loss(state, z, np.ones_like(z), Hyperparams(gamma=0.5)) == pytest.approx(0.5 * 7)


def test_loss_term_by_term(rng):
    y, psi = small_problem(rng)
    x_hat = rng.standard_normal(y.shape)
    L = random_laplacian(rng, 6)
    a = AlphaParams(random_alpha(rng))
    hp = Hyperparams(lam=0.7, beta=0.3, gamma=0.05)
    Z = build_kernel(a, 12).matrix
    expected = (np.sum((psi * (y - x_hat)) ** 2)
                + 0.7 * np.trace(x_hat.T @ L.matrix @ x_hat @ Z)
                + 0.3 * np.sum(L.matrix ** 2)
                + 0.05 * np.sum(Z ** 2))
    state = UnrollState(x_hat, L, a, 1)
    assert loss(state, y, psi, hp) == pytest.approx(expected, rel=1e-12)


def test_loss_shape_mismatch(rng):
    y, psi = small_problem(rng)
    state = UnrollState(np.zeros((2, 2)), GraphLaplacian.zeros(2), AlphaParams([1.0]), 0)
    with pytest.raises(DimensionError):
        loss(state, y, psi, Hyperparams())


def test_fd_gradient_of_gamma_term(rng):
    m, gamma = 15, 0.3
    powers = gram_powers(m, 2)
    for _ in range(5):
        a = random_alpha(rng) + 0.5

        def f(c):
            return gamma * build_kernel(c, m).frobenius_sq()

        Z = build_kernel(a, m).matrix
        analytic = np.array([2 * gamma * np.sum(Z * P) for P in powers])
        np.testing.assert_allclose(fd_gradient(f, a), analytic, rtol=1e-4)


def test_fd_gradient_forward_difference_near_zero():
    g = fd_gradient(lambda c: float(np.sum(c ** 2) + c[0]), np.array([0.0, 2.0]))
    assert g[0] == pytest.approx(1.0, abs=2e-3)
    assert g[1] == pytest.approx(4.0, rel=1e-8)


# --- forward -----------------------------------------------------------------

def test_forward_single_layer_is_composition(rng):
    y, psi = small_problem(rng)
    a = AlphaParams(random_alpha(rng))
    hp = Hyperparams(k_unroll=1, k1=30, k2=7)
    state = forward(y, psi, a, hp)
    L1 = covariance_init(y, psi)
    x1 = emd(y, psi, L1, a, hp.lam, hp.k1).x_hat
    L2 = gl(y, x1, L1, a, hp.k2, hp.beta, hp.eta).laplacian
    np.testing.assert_array_equal(state.x_hat, x1)
    assert state.laplacian == L2
    assert state.layer_index == 1 and state.alpha == a


def test_forward_full_mask_small_lambda(rng):
    x = rng.standard_normal((5, 20))
    state = forward(x, np.ones_like(x), [1.0, 1.0, 1.0], Hyperparams(lam=1e-8))
    assert np.linalg.norm(state.x_hat - x) <= 1e-4 * np.linalg.norm(x)


def test_forward_cold_start_differs_only_by_solver_path(rng):
    y, psi = small_problem(rng)
    warm = forward(y, psi, [1.0, 1.0, 1.0], Hyperparams(k1=400))
    cold = forward(y, psi, [1.0, 1.0, 1.0], Hyperparams(k1=400, warm_start=False))
    np.testing.assert_allclose(warm.x_hat, cold.x_hat, atol=1e-6)


def test_forward_reports_divergent_layer(rng):
    y, psi = small_problem(rng)
    with pytest.raises(DivergenceError) as exc:
        forward(y, psi, [1.0, 1.0, 1.0], Hyperparams(eta=1e300, k_unroll=3))
    assert exc.value.layer == 1
    np.testing.assert_array_equal(exc.value.alpha, [1.0, 1.0, 1.0])


def test_true_alpha_inpaints_better_than_identity():
    x, _ = gsd(SynthConfig(seed=3))
    hp = Hyperparams()
    err_true, err_id = [], []
    for r in range(20):
        psi = sample_mask(20, 500, 0.3, seed=100 + r)
        y = psi * x
        err_true.append(normalized_error(x, forward(y, psi, [1.0, 4.0, 1.66], hp).x_hat, psi))
        err_id.append(normalized_error(x, forward(y, psi, [1.0, 0.0, 0.0], hp).x_hat, psi))
    assert np.mean(err_true) < np.mean(err_id)


# --- training ----------------------------------------------------------------

def test_train_zero_epochs(rng):
    y, psi = small_problem(rng)
    a0 = AlphaParams([1.0, 2.0, 3.0])
    alpha, trace = train_alpha(y, psi, a0, FAST.replace(train_epochs=0))
    assert alpha == a0 and len(trace) == 0


def test_train_fixed_point(rng):
    y, psi = small_problem(rng)
    a0 = AlphaParams([1.0, 2.0, 3.0])
    alpha, trace = train_alpha(y, psi, a0, FAST, grad_tol=np.inf)
    assert alpha == a0 and len(trace) == 1


def test_train_trace_invariants(rng):
    y, psi = small_problem(rng)
    alpha, trace = train_alpha(y, psi, [1.0, 1.0, 1.0], FAST)
    n = len(trace)
    assert n == len(trace.alpha_per_epoch) == len(trace.grad_norm_per_epoch) > 0
    assert all(np.all(a.coeffs >= 0) for a in trace.alpha_per_epoch)
    assert np.all(np.isfinite(trace.loss_per_epoch))
    best = int(np.argmin(trace.loss_per_epoch))
    assert alpha == trace.alpha_per_epoch[best]


def test_train_deterministic(rng):
    y, psi = small_problem(rng)
    a1, t1 = train_alpha(y, psi, [1.0, 1.0, 1.0], FAST)
    a2, t2 = train_alpha(y, psi, [1.0, 1.0, 1.0], FAST)
    assert a1 == a2
    assert t1.loss_per_epoch == t2.loss_per_epoch
    assert t1.grad_norm_per_epoch == t2.grad_norm_per_epoch


def test_train_alpha_length_must_match_k_poly(rng):
    y, psi = small_problem(rng)
    with pytest.raises(DimensionError):
        train_alpha(y, psi, [1.0, 1.0], FAST)


def test_train_does_not_increase_loss(rng):
    y, psi = small_problem(rng)
    _, trace = train_alpha(y, psi, [1.0, 1.0, 1.0], FAST.replace(train_epochs=6))
    assert min(trace.loss_per_epoch) <= trace.loss_per_epoch[0]


def test_variation_term_uses_state_alpha(rng):
    y, psi = small_problem(rng)
    x_hat = rng.standard_normal(y.shape)
    L = random_laplacian(rng, 6)
    hp = Hyperparams(beta=1e-12, gamma=1e-12)
    s1 = UnrollState(x_hat, L, AlphaParams([0.0, 1.0, 0.0]), 0)
    s2 = UnrollState(x_hat, L, AlphaParams([0.0, 2.0, 0.0]), 0)
    d = loss(s2, y, psi, hp) - loss(s1, y, psi, hp)
    assert d == pytest.approx(graph_variation(x_hat, L, [0.0, 1.0, 0.0]), rel=1e-8)
