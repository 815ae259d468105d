"""Time the numba and numpy paths of the solver kernels side by side.

Usage: python3 benchmarks/bench_kernels.py [--n 20] [--m 500] [--repeat 5]

Each row reports the best of ``--repeat`` runs after one warm-up call, so
JIT compilation is excluded.
"""
import argparse
import timeit

import numpy as np

from gsp_unroll import Hyperparams, build_kernel, covariance_init, forward, gsd, sample_mask
from gsp_unroll import SynthConfig, _kernels
from gsp_unroll._jit import HAVE_NUMBA
from gsp_unroll.graphlearn import ProjectionMask


def best_of(fn, repeat):
    fn()  # warm-up (compiles the numba path)
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=20)
    parser.add_argument("--m", type=int, default=500)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    if not HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    hp = Hyperparams()
    x, _ = gsd(SynthConfig(n_vertices=args.n, n_timestamps=args.m, seed=0))
    psi = sample_mask(args.n, args.m, 0.3, seed=1)
    y = psi * x
    bands = build_kernel([1.0, 1.0, 1.0], args.m).bands
    L = covariance_init(y, psi).matrix
    S = x @ x.T
    mask = ProjectionMask.for_size(args.n).matrix
    tol = 1e-8 * np.linalg.norm(y)
    x0 = np.zeros_like(y)

    cases = {
        "banded matmul": lambda u: _kernels.banded_matmul(x, bands, use_numba=u),
        f"EMD ({hp.k1} CG steps)": lambda u: _kernels.emd_cg(
            y, psi, L, bands, hp.lam, x0, hp.k1, tol, use_numba=u),
        f"GL ({hp.k2} steps)": lambda u: _kernels.gl_pgd(
            S, L, mask, hp.beta, hp.eta, hp.k2, use_numba=u),
        f"forward ({hp.k_unroll} layers)": lambda u: forward(
            y, psi, [1.0, 1.0, 1.0], hp, use_numba=u),
    }
    print(f"N={args.n} M={args.m}, best of {args.repeat}")
    print(f"{'kernel':<24}{'numpy ms':>12}{'numba ms':>12}{'speedup':>10}")
    for name, run in cases.items():
        t_np = best_of(lambda: run(False), args.repeat)
        t_nb = best_of(lambda: run(True), args.repeat)
        print(f"{name:<24}{1e3 * t_np:>12.3f}{1e3 * t_nb:>12.3f}{t_np / t_nb:>10.2f}")


if __name__ == "__main__":
    main()
