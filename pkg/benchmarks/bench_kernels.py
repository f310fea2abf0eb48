#!/usr/bin/env python3
"""Benchmark the numba event kernels against the pure-numpy fallback.

Run as ``python benchmarks/bench_kernels.py``.  The same implementations
are selected package-wide by the QPAIRSIM_PURE_NUMPY environment flag;
here both are timed side by side on synthetic click streams.
"""

import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from qpairsim import kernels  # noqa: E402

DEAD_TIME = 10e-6
HALF_WINDOW = 0.5e-9


def make_stream(rng, rate_hz, duration_s):
    n = rng.poisson(rate_hz * duration_s)
    times = np.sort(rng.uniform(0.0, duration_s, n))
    ids = rng.integers(-1, n // 3 + 1, n).astype(np.int64)
    return times, ids


def timeit(fn, *args, repeats=5):
    best = float("inf")
    result = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, result


def main():
    if not kernels.USE_NUMBA:
        print("numba path unavailable or disabled; nothing to compare")
        return 1
    rng = np.random.default_rng(0)
    print(f"{'events':>10} {'kernel':>18} {'numba [ms]':>12} {'numpy [ms]':>12} "
          f"{'speedup':>8}")
    for rate in (2e3, 2e4, 2e5):
        ta, ida = make_stream(rng, rate, 10.0)
        tb, idb = make_stream(rng, rate, 10.0)

        # warm the JIT before timing
        kernels.dead_time_filter_numba(ta[:100], DEAD_TIME)
        kernels.match_coincidences_numba(ta[:100], ida[:100], tb[:100],
                                         idb[:100], HALF_WINDOW)

        t_nb, kept_nb = timeit(kernels.dead_time_filter_numba, ta, DEAD_TIME)
        t_np, kept_np = timeit(kernels.dead_time_filter_numpy, ta, DEAD_TIME)
        assert np.array_equal(kept_nb, kept_np)
        print(f"{ta.size:>10} {'dead_time_filter':>18} {t_nb * 1e3:>12.3f} "
              f"{t_np * 1e3:>12.3f} {t_np / t_nb:>8.1f}x")

        t_nb, res_nb = timeit(kernels.match_coincidences_numba,
                              ta, ida, tb, idb, HALF_WINDOW)
        t_np, res_np = timeit(kernels.match_coincidences_numpy,
                              ta, ida, tb, idb, HALF_WINDOW)
        assert res_nb == res_np
        print(f"{ta.size:>10} {'match_coincidences':>18} {t_nb * 1e3:>12.3f} "
              f"{t_np * 1e3:>12.3f} {t_np / t_nb:>8.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
