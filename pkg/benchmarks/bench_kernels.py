"""Time the per-trial statistics kernel: numba loop vs. vectorized numpy.

Usage: python3 benchmarks/bench_kernels.py [--trials N] [--d D] [--repeat R]
Run with CLOSENESS_NUMBA=0 to confirm the fallback path is what gets used.
"""
import argparse
import time

import numpy as np

from closeness import _accel
from closeness.kernels import batch_statistics
from closeness.sampling import poissonized_batch


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--trials", type=int, default=2000)
    ap.add_argument("--d", type=int, nargs="+", default=[50, 500, 5000])
    ap.add_argument("--k", type=int, default=3000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    k_bar = args.k // 3
    gen = np.random.default_rng(0)
    print(f"numba enabled: {_accel.USE_NUMBA}")
    print(f"{'d':>6} {'numpy [ms]':>12} {'numba [ms]':>12} {'speedup':>8} {'max |diff|':>11}")
    for d in args.d:
        p = np.ones(d) / d
        x, y = poissonized_batch(p, p, k_bar, args.trials, gen)
        ref = batch_statistics(x, y, k_bar, use_numba=False)
        t_np = best_of(lambda: batch_statistics(x, y, k_bar, use_numba=False), args.repeat)
        if _accel.USE_NUMBA:
            fast = batch_statistics(x, y, k_bar, use_numba=True)  # compile outside the timing
            t_nb = best_of(lambda: batch_statistics(x, y, k_bar, use_numba=True), args.repeat)
            diff = float(np.max(np.abs(fast - ref) / np.maximum(1.0, np.abs(ref))))
            print(f"{d:>6} {1e3 * t_np:>12.2f} {1e3 * t_nb:>12.2f} {t_np / t_nb:>8.1f} {diff:>11.2e}")
        else:
            print(f"{d:>6} {1e3 * t_np:>12.2f} {'-':>12} {'-':>8} {'-':>11}")


if __name__ == "__main__":
    main()
