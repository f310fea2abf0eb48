"""Hot event-stream kernels for the Monte Carlo: dead-time filtering and
coincidence matching.

Two implementations are provided with identical semantics:

* a sequential-scan version compiled with numba ``@njit`` (default), and
* a vectorized numpy fallback, selected when numba is unavailable or when
  the environment variable ``QPAIRSIM_PURE_NUMPY`` is set to a truthy value.

``benchmarks/bench_kernels.py`` compares the two paths.
"""

from __future__ import annotations

import os

import numpy as np

_ENV_FLAG = os.environ.get("QPAIRSIM_PURE_NUMPY", "").lower() in ("1", "true", "yes", "on")

try:
    from numba import njit as _njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

USE_NUMBA = _HAVE_NUMBA and not _ENV_FLAG

__all__ = [
    "USE_NUMBA",
    "dead_time_filter",
    "match_coincidences",
    "dead_time_filter_numpy",
    "match_coincidences_numpy",
]


def _dead_time_filter_loop(times, dead_time):
    """Non-paralyzable dead time: a registered event blinds the detector
    for ``dead_time``; ``times`` must be sorted ascending."""
    n = times.shape[0]
    keep = np.zeros(n, dtype=np.bool_)
    blocked_until = -np.inf
    for i in range(n):
        if times[i] >= blocked_until:
            keep[i] = True
            blocked_until = times[i] + dead_time
    return keep


def _match_coincidences_loop(t_a, id_a, t_b, id_b, half_window):
    """Greedy two-pointer matching of sorted click streams.

    A coincidence is a pair of clicks with |t_a - t_b| <= half_window; each
    click participates in at most one coincidence.  Returns (raw, true)
    where a match is true when both clicks carry the same non-negative
    origin id (same emitted pair).
    """
    raw = 0
    true = 0
    i = 0
    j = 0
    n_a = t_a.shape[0]
    n_b = t_b.shape[0]
    while i < n_a and j < n_b:
        if t_b[j] < t_a[i] - half_window:
            j += 1
        elif t_b[j] > t_a[i] + half_window:
            i += 1
        else:
            raw += 1
            if id_a[i] >= 0 and id_a[i] == id_b[j]:
                true += 1
            i += 1
            j += 1
    return raw, true


def dead_time_filter_numpy(times, dead_time):
    """Vectorized-jump equivalent of the sequential dead-time scan."""
    n = times.shape[0]
    keep = np.zeros(n, dtype=np.bool_)
    if n == 0 or dead_time <= 0.0:
        keep[:] = True
        return keep
    i = 0
    while i < n:
        keep[i] = True
        nxt = int(np.searchsorted(times, times[i] + dead_time, side="left"))
        i = nxt if nxt > i else i + 1
    return keep


def match_coincidences_numpy(t_a, id_a, t_b, id_b, half_window):
    """Vectorized candidate search + watermark pass; same greedy pairing
    as the sequential scan."""
    lo = np.searchsorted(t_b, t_a - half_window, side="left")
    hi = np.searchsorted(t_b, t_a + half_window, side="right")
    candidates = np.nonzero(hi > lo)[0]
    raw = 0
    true = 0
    watermark = 0
    for i in candidates:
        j = max(int(lo[i]), watermark)
        if j < hi[i]:
            raw += 1
            if id_a[i] >= 0 and id_a[i] == id_b[j]:
                true += 1
            watermark = j + 1
    return raw, true


if _HAVE_NUMBA:
    dead_time_filter_numba = _njit(cache=True, nogil=True)(_dead_time_filter_loop)
    match_coincidences_numba = _njit(cache=True, nogil=True)(_match_coincidences_loop)
else:  # pragma: no cover
    dead_time_filter_numba = None
    match_coincidences_numba = None

if USE_NUMBA:
    dead_time_filter = dead_time_filter_numba
    match_coincidences = match_coincidences_numba
else:
    dead_time_filter = dead_time_filter_numpy
    match_coincidences = match_coincidences_numpy
