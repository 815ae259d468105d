"""Hot loops of the inpainting and graph-update solvers.

Every kernel exists twice: a loop version compiled with numba and a
vectorized numpy version. ``USE_NUMBA`` (see ``_jit``) picks which one the
public dispatchers call. Both are importable so tests and the benchmark can
run them side by side.

The temporal kernel Z is banded with bandwidth k_poly, so it is passed around
as ``bands`` of shape (k_poly + 1, M) with ``bands[d, j] = Z[j, j + d]``
(entries past the end of a diagonal are zero padding).
"""
import numpy as np

from ._jit import USE_NUMBA, njit

# ---------------------------------------------------------------------------
# numpy implementations
# ---------------------------------------------------------------------------


def banded_matmul_numpy(X, bands):
    """Return ``X @ Z`` for symmetric banded Z."""
    m = X.shape[1]
    out = X * bands[0]
    for d in range(1, bands.shape[0]):
        if d >= m:
            break
        b = bands[d, : m - d]
        out[:, : m - d] += X[:, d:] * b
        out[:, d:] += X[:, : m - d] * b
    return out


def emd_cg_numpy(Y, psi, L, bands, lam, X0, max_iter, tol):
    X = X0.copy()
    yy = float(np.vdot(Y, Y))
    AX = psi * X + lam * (L @ banded_matmul_numpy(X, bands))
    G = 2.0 * (AX - Y)
    D = -G
    gg = float(np.vdot(G, G))
    trace = np.empty(max_iter + 1)
    trace[0] = float(np.vdot(X, 0.5 * G - Y)) + yy
    it = 0
    status = 0
    while it < max_iter:
        if np.sqrt(gg) <= tol:
            break
        AD = psi * D + lam * (L @ banded_matmul_numpy(D, bands))
        dad = float(np.vdot(D, AD))
        if not dad > 0.0:
            if not np.isfinite(dad):
                status = 1
            break
        tau = float(np.vdot(G, D)) / (2.0 * dad)
        X -= tau * D
        G -= 2.0 * tau * AD
        gg_new = float(np.vdot(G, G))
        D *= gg_new / gg
        D -= G
        gg = gg_new
        it += 1
        trace[it] = float(np.vdot(X, 0.5 * G - Y)) + yy
        if not np.isfinite(trace[it]):
            status = 1
            break
    return X, it, trace[: it + 1], status


def project_laplacian_numpy(A, proj_mask):
    W = np.maximum(A * proj_mask, 0.0)
    W = 0.5 * (W + W.T)
    np.fill_diagonal(W, 0.0)
    L = -W
    np.fill_diagonal(L, W.sum(axis=1))
    return L


def gl_pgd_numpy(S, L0, proj_mask, beta, eta, n_steps):
    L = L0.copy()
    trace = np.empty(n_steps + 1)
    trace[0] = float(np.vdot(L, S)) + beta * float(np.vdot(L, L))
    status = 0
    for i in range(n_steps):
        grad = S + 2.0 * beta * L
        L = project_laplacian_numpy(L - eta * grad, proj_mask)
        trace[i + 1] = float(np.vdot(L, S)) + beta * float(np.vdot(L, L))
        if not np.isfinite(trace[i + 1]):
            status = 1
            return L, trace[: i + 2], status
    return L, trace, status


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------


@njit(cache=True)
def _banded_into(X, bands, out):
    n, m = X.shape
    nb = bands.shape[0]
    for r in range(n):
        for j in range(m):
            out[r, j] = X[r, j] * bands[0, j]
        for d in range(1, min(nb, m)):
            for j in range(m - d):
                b = bands[d, j]
                out[r, j] += X[r, j + d] * b
                out[r, j + d] += X[r, j] * b


@njit(cache=True)
def banded_matmul_jit(X, bands):
    out = np.empty(X.shape)
    _banded_into(X, bands, out)
    return out


@njit(cache=True)
def _apply_system(V, psi, L, bands, lam, VZ, out):
    # out = psi * V + lam * L @ (V Z); VZ is scratch space
    n, m = V.shape
    _banded_into(V, bands, VZ)
    for i in range(n):
        for j in range(m):
            out[i, j] = psi[i, j] * V[i, j]
        for k in range(n):
            c = lam * L[i, k]
            if c != 0.0:
                for j in range(m):
                    out[i, j] += c * VZ[k, j]


@njit(cache=True)
def emd_cg_jit(Y, psi, L, bands, lam, X0, max_iter, tol):
    n, m = Y.shape
    X = X0.copy()
    AX = np.empty((n, m))
    scratch = np.empty((n, m))
    _apply_system(X, psi, L, bands, lam, scratch, AX)
    G = np.empty((n, m))
    D = np.empty((n, m))
    AD = np.empty((n, m))
    yy = 0.0
    gg = 0.0
    f = 0.0
    for i in range(n):
        for j in range(m):
            g = 2.0 * (AX[i, j] - Y[i, j])
            G[i, j] = g
            D[i, j] = -g
            gg += g * g
            yy += Y[i, j] * Y[i, j]
            f += X[i, j] * (0.5 * g - Y[i, j])
    trace = np.empty(max_iter + 1)
    trace[0] = f + yy
    it = 0
    status = 0
    while it < max_iter:
        if np.sqrt(gg) <= tol:
            break
        _apply_system(D, psi, L, bands, lam, scratch, AD)
        dad = 0.0
        gd = 0.0
        for i in range(n):
            for j in range(m):
                dad += D[i, j] * AD[i, j]
                gd += G[i, j] * D[i, j]
        if not dad > 0.0:
            if not np.isfinite(dad):
                status = 1
            break
        tau = gd / (2.0 * dad)
        gg_new = 0.0
        for i in range(n):
            for j in range(m):
                X[i, j] -= tau * D[i, j]
                g = G[i, j] - 2.0 * tau * AD[i, j]
                G[i, j] = g
                gg_new += g * g
        ratio = gg_new / gg
        f = 0.0
        for i in range(n):
            for j in range(m):
                D[i, j] = -G[i, j] + ratio * D[i, j]
                f += X[i, j] * (0.5 * G[i, j] - Y[i, j])
        gg = gg_new
        it += 1
        trace[it] = f + yy
        if not np.isfinite(trace[it]):
            status = 1
            break
    return X, it, trace[: it + 1].copy(), status


@njit(cache=True)
def project_laplacian_jit(A, proj_mask):
    n = A.shape[0]
    W = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                v = A[i, j] * proj_mask[i, j]
                W[i, j] = v if v > 0.0 else 0.0
    L = np.empty((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            w = 0.5 * (W[i, j] + W[j, i])
            L[i, j] = -w
            L[j, i] = -w
    for i in range(n):
        s = 0.0
        for j in range(n):
            if j != i:
                s -= L[i, j]
        L[i, i] = s
    return L


@njit(cache=True)
def gl_pgd_jit(S, L0, proj_mask, beta, eta, n_steps):
    n = S.shape[0]
    L = L0.copy()
    trace = np.empty(n_steps + 1)
    acc = 0.0
    for i in range(n):
        for j in range(n):
            acc += L[i, j] * S[i, j] + beta * L[i, j] * L[i, j]
    trace[0] = acc
    status = 0
    Lbar = np.empty((n, n))
    for step in range(n_steps):
        for i in range(n):
            for j in range(n):
                Lbar[i, j] = L[i, j] - eta * (S[i, j] + 2.0 * beta * L[i, j])
        L = project_laplacian_jit(Lbar, proj_mask)
        acc = 0.0
        for i in range(n):
            for j in range(n):
                acc += L[i, j] * S[i, j] + beta * L[i, j] * L[i, j]
        trace[step + 1] = acc
        if not np.isfinite(acc):
            status = 1
            return L, trace[: step + 2].copy(), status
    return L, trace, status


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def banded_matmul(X, bands, use_numba=None):
    use_numba = USE_NUMBA if use_numba is None else use_numba
    if use_numba:
        return banded_matmul_jit(_f64(X), _f64(bands))
    return banded_matmul_numpy(np.asarray(X, dtype=np.float64), bands)


def emd_cg(Y, psi, L, bands, lam, X0, max_iter, tol, use_numba=None):
    use_numba = USE_NUMBA if use_numba is None else use_numba
    fn = emd_cg_jit if use_numba else emd_cg_numpy
    return fn(_f64(Y), _f64(psi), _f64(L), _f64(bands), float(lam), _f64(X0),
              int(max_iter), float(tol))


def _numpy_degrees(L):
    # rebuild the diagonal with numpy's summation order so both paths agree
    # bit for bit with GraphLaplacian.from_weights
    np.fill_diagonal(L, 0.0)
    np.fill_diagonal(L, -L.sum(axis=1))
    return L


def project_laplacian(A, proj_mask, use_numba=None):
    use_numba = USE_NUMBA if use_numba is None else use_numba
    if use_numba:
        return _numpy_degrees(project_laplacian_jit(_f64(A), _f64(proj_mask)))
    return project_laplacian_numpy(_f64(A), _f64(proj_mask))


def gl_pgd(S, L0, proj_mask, beta, eta, n_steps, use_numba=None):
    use_numba = USE_NUMBA if use_numba is None else use_numba
    args = (_f64(S), _f64(L0), _f64(proj_mask), float(beta), float(eta), int(n_steps))
    if use_numba:
        L, trace, status = gl_pgd_jit(*args)
        return _numpy_degrees(L), trace, status
    return gl_pgd_numpy(*args)
