#!/usr/bin/env python3
"""Time the numba and numpy paths of every hot kernel side by side.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5] [--csv timings.csv]

Both paths are imported directly from ``lds_spectra.kernels``, so the
``LDS_SPECTRA_DISABLE_JIT`` flag does not matter here. The first jit call of
each kernel is made before timing, so compilation is excluded. Outputs of the
two paths are compared before anything is timed.
"""
import argparse
import csv
import sys
import time

import numpy as np

from lds_spectra import kernels
from lds_spectra.lds_core import random_stable_lds
from lds_spectra.poly_spectra import MonicPolynomial, companion_matrix


def _cases(rng):
    p = random_stable_lds(4, 2, 2, rng)
    T = 100_000
    x = rng.standard_normal((T, 2))
    zeta = np.zeros((T, 4))
    xi = 0.01 * rng.standard_normal((T, 2))
    lds_args = (p.A, p.B, p.C, p.D, x, zeta, xi)

    comp = companion_matrix(MonicPolynomial.from_roots(rng.uniform(-1, 1, 8)))
    cost = rng.random((8, 8))
    points = rng.standard_normal((5000, 4))
    centers = points[:8].copy()
    return [
        ("lds_recurrence T=1e5 n=4", kernels._lds_recurrence_jit,
         kernels._lds_recurrence_numpy, lds_args),
        ("real_eigvals n=8", kernels._real_eigvals_jit, kernels._real_eigvals_numpy,
         (comp, 800)),
        ("assign_min_cost 8x8", kernels._assign_min_cost_jit, kernels._assign_min_cost_numpy,
         (cost,)),
        ("nearest_center N=5000 K=8", kernels._nearest_center_jit,
         kernels._nearest_center_numpy, (points, centers)),
    ]


def _best_of(fn, args, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def _same(a, b):
    a = a if isinstance(a, tuple) else (a,)
    b = b if isinstance(b, tuple) else (b,)
    return all(np.allclose(u, v, rtol=1e-10, atol=1e-12) for u, v in zip(a, b))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--csv", help="also write the table to this file")
    args = ap.parse_args(argv)

    rows = []
    for name, jit_fn, np_fn, fargs in _cases(np.random.default_rng(args.seed)):
        jit_out = jit_fn(*fargs)  # compiles
        if not _same(jit_out, np_fn(*fargs)):
            print(f"{name}: paths disagree", file=sys.stderr)
            return 1
        t_jit = _best_of(jit_fn, fargs, args.repeat)
        t_np = _best_of(np_fn, fargs, args.repeat)
        rows.append((name, t_jit, t_np, t_np / t_jit))

    print(f"{'kernel':<28}{'numba [ms]':>12}{'numpy [ms]':>12}{'speedup':>10}")
    for name, t_jit, t_np, ratio in rows:
        print(f"{name:<28}{1e3 * t_jit:>12.3f}{1e3 * t_np:>12.3f}{ratio:>9.1f}x")
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["kernel", "numba_seconds", "numpy_seconds", "speedup"])
            w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
