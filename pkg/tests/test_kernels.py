import numpy as np
import pytest

from qpairsim import kernels


def random_stream(rng, n, span=1.0):
    t = np.sort(rng.uniform(0.0, span, n))
    ids = rng.integers(-1, n // 2 + 1, n).astype(np.int64)
    return t, ids


class TestDeadTime:
    def test_all_kept_when_sparse(self):
        t = np.array([0.0, 1.0, 2.0, 3.0])
        assert kernels.dead_time_filter(t, 0.5).all()

    def test_blocking_window(self):
        t = np.array([0.0, 0.3, 0.9, 1.05, 2.5])
        keep = kernels.dead_time_filter(t, 1.0)
        # 0.0 kept, blocks until 1.0; 1.05 kept, blocks until 2.05; 2.5 kept
        assert keep.tolist() == [True, False, False, True, True]

    def test_zero_dead_time_keeps_everything(self):
        t = np.array([0.0, 0.0, 0.1])
        assert kernels.dead_time_filter(t, 0.0).all()

    def test_empty(self):
        t = np.empty(0)
        assert kernels.dead_time_filter(t, 1.0).size == 0

    def test_nonparalyzable_throughput(self):
        # registered rate of a non-paralyzable detector: r / (1 + r * tau)
        rng = np.random.default_rng(0)
        rate, tau = 200_000.0, 1e-4
        t = np.sort(rng.uniform(0.0, 1.0, int(rate)))
        kept = kernels.dead_time_filter(t, tau).sum()
        assert kept == pytest.approx(rate / (1.0 + rate * tau), rel=0.01)


class TestMatching:
    def test_simple_pairing(self):
        ta = np.array([1.0, 2.0, 3.0])
        tb = np.array([1.0001, 2.5, 3.0001])
        ids_a = np.array([0, 1, 2], dtype=np.int64)
        ids_b = np.array([0, -1, 5], dtype=np.int64)
        raw, true = kernels.match_coincidences(ta, ids_a, tb, ids_b, 0.001)
        assert raw == 2   # (1.0, 1.0001) and (3.0, 3.0001)
        assert true == 1  # only the first shares an origin id

    def test_each_click_used_once(self):
        ta = np.array([1.0])
        tb = np.array([0.9999, 1.0001])
        ids = np.array([-1], dtype=np.int64)
        ids_b = np.array([-1, -1], dtype=np.int64)
        raw, _ = kernels.match_coincidences(ta, ids, tb, ids_b, 0.01)
        assert raw == 1

    def test_window_boundary_inclusive(self):
        ta = np.array([1.0])
        tb = np.array([1.5])
        ids = np.array([-1], dtype=np.int64)
        raw, _ = kernels.match_coincidences(ta, ids, tb, ids, 0.5)
        assert raw == 1

    def test_negative_ids_never_true(self):
        ta = np.array([1.0])
        tb = np.array([1.0])
        ids = np.array([-1], dtype=np.int64)
        raw, true = kernels.match_coincidences(ta, ids, tb, ids, 0.1)
        assert (raw, true) == (1, 0)


@pytest.mark.skipif(not kernels.USE_NUMBA, reason="numba path disabled")
class TestPathEquivalence:
    def test_dead_time_paths_identical(self):
        rng = np.random.default_rng(42)
        for n in (0, 1, 10, 1000, 50_000):
            t, _ = random_stream(rng, n)
            for dead in (0.0, 1e-6, 1e-4, 1e-2):
                a = kernels.dead_time_filter_numba(t, dead)
                b = kernels.dead_time_filter_numpy(t, dead)
                assert np.array_equal(a, b), (n, dead)

    def test_matching_paths_identical(self):
        rng = np.random.default_rng(43)
        for n in (0, 1, 10, 1000, 20_000):
            ta, ida = random_stream(rng, n)
            tb, idb = random_stream(rng, max(n // 2, 0))
            for window in (1e-7, 1e-5, 1e-3):
                a = kernels.match_coincidences_numba(ta, ida, tb, idb, window)
                b = kernels.match_coincidences_numpy(ta, ida, tb, idb, window)
                assert a == b, (n, window)

    def test_matching_paths_identical_with_ties(self):
        # exact boundary times exercise the inclusive-window comparisons
        ta = np.array([0.0, 1.0, 1.0, 2.0, 2.0])
        tb = np.array([0.5, 1.0, 1.5, 2.5, 2.5])
        ids_a = np.arange(5, dtype=np.int64)
        ids_b = np.array([0, 1, -1, 3, 4], dtype=np.int64)
        for window in (0.5, 0.25, 1.0):
            a = kernels.match_coincidences_numba(ta, ids_a, tb, ids_b, window)
            b = kernels.match_coincidences_numpy(ta, ids_a, tb, ids_b, window)
            assert a == b
