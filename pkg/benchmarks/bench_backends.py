"""Benchmark the jitted kernels against the pure-vectorized fallbacks.

Runs each hot kernel in both variants on identical inputs, checks that the
outputs agree (bitwise for integer streams, to float tolerance for
transcendental paths), and reports throughput.  Usage:

    python benchmarks/bench_backends.py [--repeat 5]

The active backend for library calls is chosen by KNOCKSIM_BACKEND
(auto | numba | numpy); this script always times both variants directly.
"""

import argparse
import time

import numpy as np

from knocksim import _kernels as K
from knocksim._backend import NUMBA_AVAILABLE


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def agreement(a, b):
    a, b = np.asarray(a), np.asarray(b)
    if a.dtype == np.uint64:
        return "bitwise" if np.array_equal(a, b) else "MISMATCH"
    gap = float(np.max(np.abs(a - b)))
    scale = max(float(np.max(np.abs(a))), 1e-300)
    return f"maxrel {gap / scale:.1e}" if gap else "bitwise"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    if not NUMBA_AVAILABLE:
        raise SystemExit("numba is not importable; nothing to compare")

    base = np.uint64(0x9AF3_1415_9265_3589)
    w = np.array([0.25, 0.45, 0.3])
    mu = np.array([0.4, 1.5, 2.6])
    sg = np.array([0.15, 0.4, 0.55])
    cumw = np.cumsum(w)
    n = 2_000_000
    y = np.linspace(-2.0, 6.0, n)
    lo, hi = -4.0, 7.4
    bound = float(np.sum(w / (np.sqrt(2 * np.pi) * sg)))
    nout = 200_000

    cases = [
        ("splitmix_block", lambda f: f(base, 0, n),
         K.splitmix_block_numba, K.splitmix_block_numpy, n),
        ("pdf_batch", lambda f: f(w, mu, sg, y),
         K.pdf_batch_numba, K.pdf_batch_numpy, n),
        ("logpdf_batch", lambda f: f(w, mu, sg, y),
         K.logpdf_batch_numba, K.logpdf_batch_numpy, n),
        ("cdf_batch", lambda f: f(w, mu, sg, y),
         K.cdf_batch_numba, K.cdf_batch_numpy, n),
        ("normal_block", lambda f: f(base, 0, n),
         K.normal_block_numba, K.normal_block_numpy, n),
        ("ancestral_block", lambda f: f(base, 0, cumw, mu, sg, n),
         K.ancestral_block_numba, K.ancestral_block_numpy, n),
        ("accept_reject", lambda f: f(base, 0, w, mu, sg, lo, hi, bound, nout, 10**6)[0],
         K.accept_reject_block_numba, K.accept_reject_block_numpy, nout),
    ]

    print(f"{'kernel':<16} {'numba':>10} {'numpy':>10} {'speedup':>8}  agreement")
    for name, call, f_nb, f_np, count in cases:
        call(f_nb)  # warm the JIT before timing
        t_nb = best_of(lambda: call(f_nb), args.repeat)
        t_np = best_of(lambda: call(f_np), args.repeat)
        agree = agreement(call(f_nb), call(f_np))
        rate = lambda t: f"{count / t / 1e6:7.1f}M/s"
        print(f"{name:<16} {rate(t_nb):>10} {rate(t_np):>10} {t_np / t_nb:7.2f}x  {agree}")


if __name__ == "__main__":
    main()
