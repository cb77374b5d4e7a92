"""Timing comparison for the hot kernels: compiled path vs pure-numpy
fallback (selected with MTBOUNDS_NO_NUMBA=1).

Run `python3 benchmarks/bench_kernels.py` to benchmark both paths (the
script re-invokes itself in a subprocess with the flag toggled), or
`python3 benchmarks/bench_kernels.py --single` to time only the current
process configuration.
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np


def bench_bvn(n=20000):
    from mtbounds import kernels as K
    rng = np.random.default_rng(1)
    h = rng.normal(size=n)
    k = rng.normal(size=n)
    r = rng.uniform(-0.95, 0.95, n)
    K.bvn_cdf(0.1, 0.2, 0.3)  # warm up any compilation
    t0 = time.perf_counter()
    acc = 0.0
    for i in range(n):
        acc += K.bvn_cdf(h[i], k[i], r[i])
    dt = time.perf_counter() - t0
    return dt, acc


def bench_measures(n=400):
    from mtbounds.distributions import GaussianCopula2, MultinomialLatent
    from mtbounds.geometry import Rect
    rng = np.random.default_rng(2)
    co = GaussianCopula2(0.4)
    lat = MultinomialLatent((0.5, 0.5), (0.2, -0.3))
    rects2 = []
    rects3 = []
    for _ in range(n):
        lo = rng.random(2)
        hi = np.maximum(lo, rng.random(2))
        rects2.append(Rect(tuple(lo), tuple(hi)))
        lo = rng.random(3)
        hi = np.maximum(lo, rng.random(3))
        rects3.append(Rect(tuple(lo), tuple(hi)))
    co.rect_measure(rects2[0])
    lat.rect_measure(rects3[0])
    t0 = time.perf_counter()
    acc = sum(co.rect_measure(r) for r in rects2)
    acc += sum(lat.rect_measure(r) for r in rects3)
    return time.perf_counter() - t0, acc


def bench_simplex(n=150):
    from mtbounds import lp as L
    rng = np.random.default_rng(3)
    probs = []
    for _ in range(n):
        d = int(rng.integers(8, 30))
        me = int(rng.integers(1, 5))
        mu = int(rng.integers(0, 5))
        x0 = rng.uniform(0.1, 0.9, d)
        A_eq = rng.normal(size=(me, d))
        A_ub = rng.normal(size=(mu, d))
        probs.append(L.LinearProgram(rng.normal(size=d), A_eq, A_eq @ x0,
                                     A_ub, A_ub @ x0 + rng.uniform(0, 0.5, mu),
                                     np.zeros(d), np.ones(d)))
    L.solve_lp(probs[0])
    t0 = time.perf_counter()
    acc = 0.0
    for p in probs:
        out = L.solve_lp(p)
        if out.status == L.STATUS_OPTIMAL:
            acc += out.value
    return time.perf_counter() - t0, acc


def run_single():
    from mtbounds._jit import using_numba
    label = "numba" if using_numba else "numpy fallback"
    print(f"path: {label}")
    for name, fn in (("bvn_cdf x20000", bench_bvn),
                     ("rect measures x800", bench_measures),
                     ("simplex x150", bench_simplex)):
        dt, acc = fn()
        print(f"  {name:<22s} {dt * 1e3:9.1f} ms   (checksum {acc:.6f})")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--single", action="store_true",
                    help="time only the current configuration")
    args = ap.parse_args()
    if args.single:
        run_single()
        return
    for flag in ("0", "1"):
        env = dict(os.environ, MTBOUNDS_NO_NUMBA=flag)
        subprocess.run([sys.executable, os.path.abspath(__file__), "--single"],
                       env=env, check=True)


if __name__ == "__main__":
    main()
