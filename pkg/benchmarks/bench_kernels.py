"""Time every dual-path kernel: numba loops vs the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5] [--quick]

Outputs of both paths are compared before timing; a mismatch aborts.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from lowspec._accel import USE_NUMBA
from lowspec.nn.kernels import COL2IM, IM2COL
from lowspec.one_class.iforest import PATH_LENGTH, IsoForestConfig, grow
from lowspec.one_class.isotonic import PAV
from lowspec.one_class.ocsvm import SMO, initial_alpha, rbf_kernel


def arrays_of(result):
    parts = result if isinstance(result, tuple) else (result,)
    return [p for p in parts if isinstance(p, np.ndarray)]


def best_of(fn, repeat):
    fn()  # warm-up (and JIT compile)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(scale=1):
    rng = np.random.default_rng(0)
    out = []

    xp = rng.standard_normal((20 * scale, 16, 62, 31))
    cols = IM2COL["numpy"](xp, 3, 5, 1, 2)
    out.append(("im2col 20x16x62x31 k3x5 s1x2",
                {k: (lambda f=f: f(xp, 3, 5, 1, 2)) for k, f in IM2COL.items()}))
    out.append(("col2im (same shapes)",
                {k: (lambda f=f: f(cols, xp.shape, 3, 5, 1, 2)) for k, f in COL2IM.items()}))

    X = rng.standard_normal((120 * scale, 64)) * 3
    K = rbf_kernel(X, X, 0.001)
    alpha0 = initial_alpha(len(X), 0.08)
    out.append((f"smo n={len(X)}",
                {k: (lambda f=f: f(K, alpha0.copy(), 1e-3, 100000)) for k, f in SMO.items()}))

    forest = grow(X, IsoForestConfig())
    cat, leaf_c, offsets = forest._packed()
    Q = rng.standard_normal((500 * scale, 64))
    args = (Q, cat["feature"], cat["threshold"], cat["left"], cat["right"], leaf_c, offsets)
    out.append((f"iforest path length 70 trees, {len(Q)} queries",
                {k: (lambda f=f: f(*args)) for k, f in PATH_LENGTH.items()}))

    y = rng.random(5000 * scale)
    w = np.ones_like(y)
    out.append((f"pav n={len(y)}", {k: (lambda f=f: f(y, w)) for k, f in PAV.items()}))
    return out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--quick", action="store_true", help="one timed repeat per kernel")
    args = p.parse_args(argv)
    repeat = 1 if args.quick else args.repeat
    print(f"default path: {'numba' if USE_NUMBA else 'numpy'}")
    print(f"{'kernel':<44} {'numba ms':>10} {'numpy ms':>10} {'speedup':>8}")
    for name, impls in cases(1):
        for a, b in zip(arrays_of(impls["numpy"]()), arrays_of(impls["numba"]())):
            if not np.allclose(a, b, rtol=1e-9, atol=1e-9):
                raise SystemExit(f"{name}: numba and numpy paths disagree")
        t_nb = best_of(impls["numba"], repeat)
        t_np = best_of(impls["numpy"], repeat)
        print(f"{name:<44} {1e3 * t_nb:>10.2f} {1e3 * t_np:>10.2f} {t_np / t_nb:>7.1f}x")


if __name__ == "__main__":
    main()
