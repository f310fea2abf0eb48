import math
from dataclasses import replace

import numpy as np
import pytest

from qpairsim import counting, montecarlo, spectral
from qpairsim.counting import DetectorParams, SourceParams
from qpairsim.exceptions import InsufficientStatisticsError
from qpairsim.montecarlo import (
    ExperimentConfig,
    default_plan,
    run_attenuation_study,
    run_bell_experiment,
    sweep_figure2,
    sweep_figure3,
)

PUMP = 384.8
SQRT2 = math.sqrt(2.0)


def channels(shape="rectangular", t=1.0, order=4):
    s = spectral.make_channel(shape, 192.1, 100.0, t, 3.0, order=order)
    i = spectral.make_channel(shape, 192.7, 100.0, t, 3.0, order=order)
    return s, i


def make_config(pair_rate=200.0, v0=0.85, eta=1.0, shape="rectangular",
                efficiency=0.25, dark_rate=0.0, dead_time=10e-6,
                fringe_s=6.0, chsh_s=6.0, seed=1, t=1.0):
    ch_s, ch_i = channels(shape, t=t)
    det = DetectorParams(quantum_efficiency=efficiency,
                         dark_count_rate_hz=dark_rate, dead_time_s=dead_time)
    overlap = spectral.pair_overlap(ch_s, ch_i, PUMP)
    p0 = counting.calibrate_pair_rate(pair_rate * 60.0, overlap, det, det,
                                      include_dead_time=False)
    src = SourceParams(pair_rate_density=p0, pump_frequency_thz=PUMP,
                       baseline_v0=v0)
    return ExperimentConfig(source=src, signal_channel=ch_s, idler_channel=ch_i,
                            detector_a=det, detector_b=det,
                            plan=default_plan(fringe_s, chsh_s),
                            seed=seed, eta=eta)


class TestDeterminism:
    def test_same_seed_bit_identical(self):
        cfg = make_config(fringe_s=2.0, chsh_s=2.0, seed=9)
        res1, recs1 = run_bell_experiment(cfg)
        res2, recs2 = run_bell_experiment(cfg)
        assert res1 == res2
        assert recs1 == recs2

    def test_parallel_identical_to_serial(self):
        cfg = make_config(fringe_s=2.0, chsh_s=2.0, seed=10)
        res_serial, recs_serial = run_bell_experiment(cfg, jobs=1)
        res_par, recs_par = run_bell_experiment(cfg, jobs=4)
        assert res_serial == res_par
        assert recs_serial == recs_par

    def test_different_seeds_statistically_compatible(self):
        res = []
        for seed in (3, 4):
            cfg = make_config(fringe_s=8.0, chsh_s=8.0, seed=seed)
            res.append(run_bell_experiment(cfg, jobs=4)[0])
        a, b = res
        for attr in ("v0", "v45", "s"):
            va, vb = getattr(a, attr), getattr(b, attr)
            sa, sb = getattr(a, attr + "_sigma"), getattr(b, attr + "_sigma")
            assert abs(va - vb) <= 3.0 * math.hypot(sa, sb), attr


class TestAgainstAnalytics:
    def test_calibrated_state_reproduces_chsh(self):
        # 32 settings x 20 s is a ten-minute-class acquisition
        cfg = make_config(pair_rate=100.0, v0=0.85, eta=1.0,
                          fringe_s=20.0, chsh_s=20.0, seed=6)
        res, _ = run_bell_experiment(cfg, jobs=4)
        target = SQRT2 * 0.85 * 2.0
        assert abs(res.s - target) <= 3.0 * res.s_sigma
        assert abs(res.v0 - 0.85) <= 3.0 * res.v0_sigma

    def test_visibilities_track_eta(self):
        cfg = make_config(pair_rate=250.0, v0=0.9, eta=0.6,
                          fringe_s=10.0, chsh_s=4.0, seed=8)
        res, _ = run_bell_experiment(cfg, jobs=4)
        assert abs(res.v0 - 0.9) <= 3.0 * res.v0_sigma
        assert abs(res.v45 - 0.54) <= 3.0 * res.v45_sigma
        assert abs(res.eta_hat - 0.6) <= 3.0 * res.eta_hat_sigma

    def test_brightness_matches_calibration(self):
        cfg = make_config(pair_rate=300.0, v0=1.0, fringe_s=10.0, chsh_s=2.0,
                          seed=12, dead_time=0.0)
        res, _ = run_bell_experiment(cfg, jobs=4)
        total_fringe = 300.0 * 60.0
        assert res.brightness_cpm == pytest.approx(total_fringe, rel=0.05)

    def test_no_pairs_darks_only_gives_null_s(self):
        ch_s, ch_i = channels()
        det = DetectorParams(quantum_efficiency=0.2, dark_count_rate_hz=1e5)
        src = SourceParams(pair_rate_density=0.0, pump_frequency_thz=PUMP)
        cfg = ExperimentConfig(source=src, signal_channel=ch_s, idler_channel=ch_i,
                               detector_a=det, detector_b=det,
                               plan=default_plan(10.0, 10.0), seed=5, eta=1.0)
        res, recs = run_bell_experiment(cfg, jobs=4)
        assert abs(res.s) <= 3.0 * res.s_sigma
        assert all(r.labeled_true == 0 for r in recs)

    def test_zero_everything_raises_insufficient_statistics(self):
        ch_s, ch_i = channels()
        det = DetectorParams(quantum_efficiency=0.2, dark_count_rate_hz=0.0)
        src = SourceParams(pair_rate_density=0.0, pump_frequency_thz=PUMP)
        cfg = ExperimentConfig(source=src, signal_channel=ch_s, idler_channel=ch_i,
                               detector_a=det, detector_b=det,
                               plan=default_plan(1.0, 1.0), seed=5, eta=1.0)
        with pytest.raises(InsufficientStatisticsError) as err:
            run_bell_experiment(cfg)
        assert len(err.value.records) > 0


class TestVmaxCrossChecks:
    def test_full_mode_visibility_matches_rate_budget(self):
        # dark-dominated working point with a sizable accidental fraction
        ch_s, ch_i = channels()
        det = DetectorParams(quantum_efficiency=0.2, dark_count_rate_hz=3e5,
                             dead_time_s=0.0)
        overlap = spectral.pair_overlap(ch_s, ch_i, PUMP)
        p0 = counting.calibrate_pair_rate(150.0 * 60.0, overlap, det, det,
                                          include_dead_time=False)
        src = SourceParams(pair_rate_density=p0, pump_frequency_thz=PUMP,
                           baseline_v0=1.0)
        cfg = ExperimentConfig(source=src, signal_channel=ch_s, idler_channel=ch_i,
                               detector_a=det, detector_b=det,
                               plan=default_plan(20.0, 1.0), seed=21, eta=1.0)
        budget = counting.rate_budget(src, overlap, det, det)
        assert budget.v_max < 0.95  # the accidental fraction actually bites
        res, _ = run_bell_experiment(cfg, jobs=4)
        assert abs(res.v0 - budget.v_max) <= 3.0 * res.v0_sigma

    def test_paper_mode_visibility_matches_vmax(self):
        # low-gain point where the bare rate expressions apply
        ch_s, ch_i = channels()
        det = DetectorParams(quantum_efficiency=1.0, dark_count_rate_hz=0.0,
                             dead_time_s=0.0)
        overlap = spectral.pair_overlap(ch_s, ch_i, PUMP)
        p0 = 1.0e4
        src = SourceParams(pair_rate_density=p0, pump_frequency_thz=PUMP,
                           baseline_v0=1.0)
        p_tc, p_ac = counting.coincidence_probabilities(src, overlap, det, det,
                                                        mode="paper")
        v_max = counting.max_visibility(p_ac, p_tc)
        cfg = ExperimentConfig(source=src, signal_channel=ch_s, idler_channel=ch_i,
                               detector_a=det, detector_b=det,
                               plan=default_plan(5.0, 1.0), seed=22, eta=1.0)
        res, _ = run_bell_experiment(cfg, jobs=4)
        assert abs(res.v0 - v_max) <= 3.0 * res.v0_sigma


class TestAccidentalAccounting:
    def test_tally_below_product_bound(self):
        # ground-truth accidentals vs the per-gate product bound, many records
        records = []
        for seed in range(4):
            cfg = make_config(pair_rate=150.0, dark_rate=1e5, efficiency=0.1,
                              fringe_s=4.0, chsh_s=4.0, seed=100 + seed)
            _, recs = run_bell_experiment(cfg, jobs=4)
            records.extend(recs)
        ok = sum(r.labeled_accidentals <= r.product_bound for r in records)
        assert ok / len(records) >= 0.99
        # and the bound is not vacuous: accidentals do occur
        assert sum(r.labeled_accidentals for r in records) > 50

    def test_tight_estimate_tracks_truth(self):
        cfg = make_config(pair_rate=150.0, dark_rate=1e5, efficiency=0.1,
                          fringe_s=6.0, chsh_s=6.0, seed=31)
        _, recs = run_bell_experiment(cfg, jobs=4)
        est = sum(r.accidental_estimate for r in recs)
        truth = sum(r.labeled_accidentals for r in recs)
        assert est == pytest.approx(truth, rel=0.15)


class TestCalibrationFixture:
    def test_brightness_547_per_minute_fixture(self):
        # synthetic flat-top device calibrated to the 547/min working point
        ch_s, ch_i = channels("flattop", t=0.7)
        det = DetectorParams(quantum_efficiency=0.1, dark_count_rate_hz=72500.0)
        overlap = spectral.pair_overlap(ch_s, ch_i, PUMP)
        p0 = counting.calibrate_pair_rate(547.0, overlap, det, det)
        src = SourceParams(pair_rate_density=p0, pump_frequency_thz=PUMP,
                           baseline_v0=1.0)
        cfg = ExperimentConfig(source=src, signal_channel=ch_s, idler_channel=ch_i,
                               detector_a=det, detector_b=det,
                               plan=default_plan(60.0, 2.0), seed=77, eta=1.0)
        res, _ = run_bell_experiment(cfg, jobs=4)
        # ~870 subtracted fringe counts: 3 sigma is about 10% here
        assert res.brightness_cpm == pytest.approx(547.0, rel=0.10)


class TestAttenuation:
    def test_zero_length_identical_to_base(self):
        cfg = make_config(fringe_s=2.0, chsh_s=2.0, seed=13)
        base, _ = run_bell_experiment(cfg)
        study = run_attenuation_study(cfg, [0.0])
        assert study[0] == base

    def test_brightness_scales_per_arm(self):
        # vary one arm only: brightness must be linear in that transmission
        cfg = make_config(pair_rate=400.0, v0=1.0, fringe_s=8.0, chsh_s=1.0,
                          seed=14, dead_time=0.0)
        dbs = [0.0, 3.0, 6.0]
        brightness = []
        for db in dbs:
            res, _ = run_bell_experiment(replace(cfg, attenuation_db_a=db), jobs=4)
            brightness.append(res.brightness_cpm)
        t = 10.0 ** (-np.asarray(dbs) / 10.0)
        slope = np.polyfit(np.log(t), np.log(brightness), 1)[0]
        assert slope == pytest.approx(1.0, abs=0.05)

    def test_brightness_scales_with_product(self):
        cfg = make_config(pair_rate=400.0, v0=1.0, fringe_s=8.0, chsh_s=1.0,
                          seed=15, dead_time=0.0)
        lengths = [0.0, 5.0, 10.0]
        results = run_attenuation_study(cfg, lengths, db_per_km=0.2, jobs=4)
        t_prod = 10.0 ** (-2.0 * 0.2 * np.asarray(lengths) / 10.0)
        slope = np.polyfit(np.log(t_prod),
                           np.log([r.brightness_cpm for r in results]), 1)[0]
        assert slope == pytest.approx(1.0, abs=0.05)

    def test_long_distance_dark_dominated_null(self):
        # with 60 km of fiber per arm the dark accidental floor swamps the
        # pairs and the Bell parameter collapses to noise around zero
        ch_s, ch_i = channels("flattop", t=0.7)
        det = DetectorParams(quantum_efficiency=0.1, dark_count_rate_hz=72500.0)
        overlap = spectral.pair_overlap(ch_s, ch_i, PUMP)
        p0 = counting.calibrate_pair_rate(540.0, overlap, det, det)
        src = SourceParams(pair_rate_density=p0, pump_frequency_thz=PUMP,
                           baseline_v0=0.99)
        cfg = ExperimentConfig(source=src, signal_channel=ch_s, idler_channel=ch_i,
                               detector_a=det, detector_b=det,
                               plan=default_plan(45.0, 60.0), seed=19, eta=1.0)
        (far,) = run_attenuation_study(cfg, [60.0], db_per_km=0.2, jobs=4)
        assert abs(far.s) <= 3.0 * far.s_sigma
        assert far.s_sigma > 0.05  # genuinely statistics-limited


class TestSweeps:
    def test_figure2_orders_devices_by_quality(self):
        # same p0 and T; the lower-overlap device has a lower raw fringe
        # visibility once the dark-count accidental floor matters
        ch_rect = channels("rectangular")
        ch_gauss = channels("gaussian")
        det = DetectorParams(quantum_efficiency=0.1, dark_count_rate_hz=5e5,
                             dead_time_s=0.0)
        overlap = spectral.pair_overlap(*ch_rect, PUMP)
        p0 = counting.calibrate_pair_rate(120.0 * 60.0, overlap, det, det,
                                          include_dead_time=False)
        src = SourceParams(pair_rate_density=p0, pump_frequency_thz=PUMP,
                           baseline_v0=1.0)
        base = ExperimentConfig(source=src, signal_channel=ch_rect[0],
                                idler_channel=ch_rect[1], detector_a=det,
                                detector_b=det, plan=default_plan(30.0, 1.0),
                                seed=16, eta=1.0)
        rows = sweep_figure2([("rect", *ch_rect), ("gauss", *ch_gauss)], base,
                             jobs=4)
        assert rows[0]["zeta_q"] == pytest.approx(1.0, abs=1e-6)
        assert rows[1]["zeta_q"] == pytest.approx(0.5, abs=1e-3)
        margin = 2.0 * math.hypot(rows[0]["v0_sigma"], rows[1]["v0_sigma"])
        assert rows[0]["v0"] > rows[1]["v0"] - margin
        assert rows[0]["v0"] - rows[1]["v0"] > 0.01

    def test_figure2_single_device(self):
        cfg = make_config(fringe_s=2.0, chsh_s=2.0, seed=17)
        rows = sweep_figure2([("only", cfg.signal_channel, cfg.idler_channel)], cfg)
        assert len(rows) == 1

    def test_figure2_low_gain_limit_recovers_baseline(self):
        cfg = make_config(pair_rate=150.0, v0=0.8, fringe_s=8.0, chsh_s=1.0,
                          seed=18)
        rows = sweep_figure2([("dev", cfg.signal_channel, cfg.idler_channel)],
                             cfg, jobs=4)
        assert abs(rows[0]["v0"] - 0.8) <= 3.0 * rows[0]["v0_sigma"]

    def test_figure3_grid(self):
        rows = sweep_figure3(np.linspace(0, 1, 11), np.linspace(0, 1, 11))
        assert len(rows) == 121
        top = [r for r in rows if r["v0"] == 1.0 and r["eta"] == 1.0][0]
        assert top["s"] == pytest.approx(2.0 * SQRT2, abs=1e-12)
        mid = [r for r in rows if r["v0"] == 0.5 and r["eta"] == 0.0][0]
        assert mid["s"] == pytest.approx(SQRT2 / 2.0, abs=1e-12)

    def test_figure3_boundary_contour(self):
        rows = sweep_figure3([1.0 / SQRT2], [1.0])
        assert rows[0]["s"] == pytest.approx(2.0, abs=1e-12)

    def test_figure3_overlay_points(self):
        rows = sweep_figure3([0.5], [0.5], measured_points=[("x", 0.85, 1.0, 2.57)])
        assert rows[-1]["kind"] == "measured:x"
