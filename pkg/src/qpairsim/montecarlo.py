"""Event-level simulation of the full distribution experiment.

Per measurement setting the simulator draws Poisson pair emissions and
dark counts into synchronized detector gates, resolves analyzer outcomes
from the distributed two-qubit state, applies quantum efficiency,
non-paralyzable dead time and a coincidence window, and tallies count
records.  Visibilities and the CHSH parameter are estimated from the raw
coincidence counts (accidentals dilute the fringe, exactly as in the
analytic V_max); the brightness is accidental-subtracted.

Timing model: both detectors are gated by a common trigger, the photons
of a pair arrive simultaneously within a gate, uncorrelated arrivals are
uniform over the gate, and two clicks coincide when their absolute times
differ by at most half the coincidence window.

Determinism: every (pair, setting) acquisition owns a counter-based
Philox substream derived from the master seed, so serial and parallel
executions produce bit-identical results.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import counting, kernels, quantum, spectral
from .counting import DetectorParams, SourceParams
from .exceptions import InsufficientStatisticsError, InvalidParameterError
from .quantum import MeasurementSetting, PolarizationModel
from .spectral import ChannelSpectrum

__all__ = [
    "PlanEntry",
    "ExperimentConfig",
    "CountRecord",
    "BellResult",
    "default_plan",
    "analyze_records",
    "run_bell_experiment",
    "run_attenuation_study",
    "sweep_figure2",
    "sweep_figure3",
]

# physical analyzer angles, degrees
FRINGE_ANGLES = (0.0, 45.0, 90.0, 135.0)
CHSH_A = (0.0, 45.0)          # a, a'
CHSH_B = (22.5, 67.5)         # b, b'


@dataclass(frozen=True)
class PlanEntry:
    """One acquisition: physical analyzer angles (degrees) and duration."""

    alice_deg: float
    bob_deg: float
    duration_s: float
    role: str = "fringe"  # "fringe" or "chsh"

    def setting(self) -> MeasurementSetting:
        return MeasurementSetting(math.radians(2.0 * self.alice_deg),
                                  math.radians(2.0 * self.bob_deg))


def default_plan(fringe_duration_s: float = 30.0,
                 chsh_duration_s: float = 30.0) -> tuple[PlanEntry, ...]:
    """4x4 fringe grid plus the 16 CHSH correlator sub-settings."""
    plan = [PlanEntry(a, b, fringe_duration_s, "fringe")
            for a in FRINGE_ANGLES for b in FRINGE_ANGLES]
    for a in CHSH_A:
        for b in CHSH_B:
            for da in (0.0, 90.0):
                for db in (0.0, 90.0):
                    plan.append(PlanEntry(a + da, b + db, chsh_duration_s, "chsh"))
    return tuple(plan)


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of one simulated channel-pair experiment."""

    source: SourceParams
    signal_channel: ChannelSpectrum
    idler_channel: ChannelSpectrum
    detector_a: DetectorParams
    detector_b: DetectorParams
    plan: tuple[PlanEntry, ...]
    seed: int
    attenuation_db_a: float = 0.0
    attenuation_db_b: float = 0.0
    eta: float | None = None  # None: derive from channel PMD delays
    pair_salt: int = 0        # distinguishes substreams across channel pairs

    def __post_init__(self):
        if not self.plan:
            raise InvalidParameterError("measurement plan is empty")
        if any(e.duration_s <= 0 for e in self.plan):
            raise InvalidParameterError("acquisition durations must be positive")
        if self.attenuation_db_a < 0 or self.attenuation_db_b < 0:
            raise InvalidParameterError("attenuation must be >= 0 dB")
        if not (0 <= self.seed < 2**64):
            raise InvalidParameterError("seed must fit in 64 bits")
        det_a, det_b = self.detector_a, self.detector_b
        if (det_a.trigger_rate_hz != det_b.trigger_rate_hz
                or det_a.gate_width_s != det_b.gate_width_s
                or det_a.coincidence_window_s != det_b.coincidence_window_s):
            raise InvalidParameterError(
                "both detectors must share trigger rate, gate width and "
                "coincidence window (common trigger and one coincidence unit)"
            )
        if det_a.trigger_rate_hz <= 0 or det_a.gate_width_s <= 0:
            raise InvalidParameterError("gated simulation needs a positive "
                                        "trigger rate and gate width")

    def polarization_model(self) -> PolarizationModel:
        if self.eta is not None:
            return PolarizationModel(v0=self.source.baseline_v0, eta=self.eta)
        prof_s = spectral.temporal_profile(self.signal_channel)
        prof_i = spectral.temporal_profile(self.idler_channel)
        tau = abs(self.signal_channel.pmd_delay_ps - self.idler_channel.pmd_delay_ps)
        eta = spectral.pmd_overlap(prof_s, prof_i, tau)
        return PolarizationModel(v0=self.source.baseline_v0, eta=eta, tau_pmd_ps=tau)

    def overlap(self) -> spectral.PairOverlap:
        return spectral.pair_overlap(self.signal_channel, self.idler_channel,
                                     self.source.pump_frequency_thz)

    def linear_attenuations(self) -> tuple[float, float]:
        return (10.0 ** (-self.attenuation_db_a / 10.0),
                10.0 ** (-self.attenuation_db_b / 10.0))


@dataclass(frozen=True)
class CountRecord:
    """Tallies for one acquisition setting."""

    alice_deg: float
    bob_deg: float
    role: str
    duration_s: float
    singles_a: int
    singles_b: int
    raw_coincidences: int
    accidental_estimate: float
    labeled_true: int         # ground truth from event labels
    labeled_accidentals: int  # = raw - labeled_true
    product_bound: float      # per-gate product upper bound on accidentals

    def __post_init__(self):
        if min(self.singles_a, self.singles_b, self.raw_coincidences) < 0:
            raise InvalidParameterError("counts must be non-negative")
        if self.raw_coincidences > min(self.singles_a, self.singles_b):
            raise InvalidParameterError("coincidences exceed singles")


@dataclass(frozen=True)
class BellResult:
    """Estimated observables for one channel pair, 1-sigma Poisson errors."""

    v0: float
    v0_sigma: float
    v45: float
    v45_sigma: float
    s: float
    s_sigma: float
    brightness_cpm: float
    eta_hat: float
    eta_hat_sigma: float


def _rng_for(seed: int, pair_salt: int, setting_index: int) -> np.random.Generator:
    key = (int(seed) << 64) | (int(pair_salt) << 32) | int(setting_index)
    return np.random.Generator(np.random.Philox(key=key))


def _joint_click_probabilities(state: quantum.TwoQubitState, setting: MeasurementSetting):
    """(p11, p10, p01, p00, pa, pb): analyzer outcome probabilities per pair."""
    c11 = quantum.coincidence_probability(state, setting)
    pa = quantum.single_arm_probability(state, setting.alice_bloch, "alice")
    pb = quantum.single_arm_probability(state, setting.bob_bloch, "bob")
    p11 = c11
    p10 = max(pa - c11, 0.0)
    p01 = max(pb - c11, 0.0)
    p00 = max(1.0 - p11 - p10 - p01, 0.0)
    return p11, p10, p01, p00, pa, pb


def _registered_clicks(t_pair, ids_pair, t_extra, dead_time_s):
    """Sort candidate clicks, apply dead time; returns (times, origin ids)."""
    times = np.concatenate([t_pair, t_extra])
    ids = np.concatenate([ids_pair, np.full(t_extra.size, -1, dtype=np.int64)])
    order = np.argsort(times, kind="stable")
    times, ids = times[order], ids[order]
    keep = kernels.dead_time_filter(times, dead_time_s)
    return times[keep], ids[keep]


def _simulate_setting(config: ExperimentConfig, state: quantum.TwoQubitState,
                      overlap: spectral.PairOverlap, entry: PlanEntry,
                      setting_index: int) -> CountRecord:
    rng = _rng_for(config.seed, config.pair_salt, setting_index)
    det_a, det_b = config.detector_a, config.detector_b
    att_a, att_b = config.linear_attenuations()
    src = config.source

    trigger = det_a.trigger_rate_hz
    gate_w = det_a.gate_width_s
    duty = det_a.duty_cycle
    period = 1.0 / trigger
    n_gates = max(int(round(entry.duration_s * trigger)), 1)

    # arrival rates per wall second (thinned to open gates by the duty cycle)
    pair_rate = (src.pair_rate_density * overlap.i2 * overlap.t_signal
                 * overlap.t_idler * att_a * att_b)
    arr_a = src.pair_rate_density * overlap.i1_signal * overlap.t_signal * att_a
    arr_b = src.pair_rate_density * overlap.i1_idler * overlap.t_idler * att_b
    lone_a = max(arr_a - pair_rate, 0.0)
    lone_b = max(arr_b - pair_rate, 0.0)

    n_pair = int(rng.poisson(pair_rate * duty * entry.duration_s))
    n_lone_a = int(rng.poisson(lone_a * duty * entry.duration_s))
    n_lone_b = int(rng.poisson(lone_b * duty * entry.duration_s))
    n_dark_a = int(rng.poisson(det_a.dark_prob_per_gate * n_gates))
    n_dark_b = int(rng.poisson(det_b.dark_prob_per_gate * n_gates))

    p11, p10, p01, _, pa, pb = _joint_click_probabilities(state, entry.setting())
    eff_a, eff_b = det_a.quantum_efficiency, det_b.quantum_efficiency

    # pairs share an arrival time; analyzer outcomes are drawn jointly
    t_pair = rng.integers(0, n_gates, size=n_pair) * period \
        + rng.uniform(0.0, gate_w, size=n_pair)
    r = rng.random(n_pair)
    passes_a = r < p11 + p10
    passes_b = (r < p11) | ((r >= p11 + p10) & (r < p11 + p10 + p01))
    click_a = passes_a & (rng.random(n_pair) < eff_a)
    click_b = passes_b & (rng.random(n_pair) < eff_b)
    pair_ids = np.arange(n_pair, dtype=np.int64)

    def _uncorrelated_times(n, click_prob):
        kept = int(rng.binomial(n, click_prob)) if n else 0
        return rng.integers(0, n_gates, size=kept) * period \
            + rng.uniform(0.0, gate_w, size=kept)

    t_extra_a = np.concatenate([
        _uncorrelated_times(n_lone_a, pa * eff_a),
        _uncorrelated_times(n_dark_a, 1.0),
    ])
    t_extra_b = np.concatenate([
        _uncorrelated_times(n_lone_b, pb * eff_b),
        _uncorrelated_times(n_dark_b, 1.0),
    ])

    ta, ida = _registered_clicks(t_pair[click_a], pair_ids[click_a],
                                 t_extra_a, det_a.dead_time_s)
    tb, idb = _registered_clicks(t_pair[click_b], pair_ids[click_b],
                                 t_extra_b, det_b.dead_time_s)

    half_window = det_a.coincidence_window_s / 2.0
    raw, true = kernels.match_coincidences(ta, ida, tb, idb, half_window)

    singles_a, singles_b = int(ta.size), int(tb.size)
    acc_est = (singles_a * singles_b * det_a.coincidence_window_s
               / (entry.duration_s * duty))
    bound = counting.accidental_product_bound(singles_a, singles_b, n_gates)
    return CountRecord(
        alice_deg=entry.alice_deg, bob_deg=entry.bob_deg, role=entry.role,
        duration_s=entry.duration_s, singles_a=singles_a, singles_b=singles_b,
        raw_coincidences=int(raw), accidental_estimate=acc_est,
        labeled_true=int(true), labeled_accidentals=int(raw - true),
        product_bound=bound,
    )


def _find_record(records, alice_deg, bob_deg):
    for rec in records:
        if (math.isclose(rec.alice_deg % 180.0, alice_deg % 180.0, abs_tol=1e-9)
                and math.isclose(rec.bob_deg % 180.0, bob_deg % 180.0, abs_tol=1e-9)):
            return rec
    return None


def _visibility_from(records, alice_deg, bob_max_deg, records_all):
    rec_max = _find_record(records, alice_deg, bob_max_deg)
    rec_min = _find_record(records, alice_deg, bob_max_deg + 90.0)
    if rec_max is None or rec_min is None:
        raise InsufficientStatisticsError(
            f"missing fringe settings around A={alice_deg} deg", records_all)
    c_max, c_min = rec_max.raw_coincidences, rec_min.raw_coincidences
    total = c_max + c_min
    if total == 0:
        raise InsufficientStatisticsError(
            f"zero coincidences in the A={alice_deg} deg fringe", records_all)
    v = (c_max - c_min) / total
    sigma = 2.0 * math.sqrt(c_max**2 * c_min + c_min**2 * c_max) / total**2
    return v, max(sigma, 1.0 / total)


def _correlator_from(records, a_deg, b_deg, records_all):
    counts = []
    for da, db in ((0.0, 0.0), (0.0, 90.0), (90.0, 0.0), (90.0, 90.0)):
        rec = _find_record(records, a_deg + da, b_deg + db)
        if rec is None:
            raise InsufficientStatisticsError(
                f"missing correlator setting ({a_deg + da}, {b_deg + db})", records_all)
        counts.append(rec.raw_coincidences)
    c1, c2, c3, c4 = counts
    n = c1 + c2 + c3 + c4
    if n == 0:
        raise InsufficientStatisticsError(
            f"zero coincidences in correlator ({a_deg}, {b_deg})", records_all)
    num = c1 - c2 - c3 + c4
    e = num / n
    var = 0.0
    for c, sign in zip(counts, (1.0, -1.0, -1.0, 1.0)):
        var += ((sign * n - num) / n**2) ** 2 * c
    return e, math.sqrt(max(var, 1.0 / n**2))


def analyze_records(records) -> BellResult:
    """Reduce count records to the Bell-test observables."""
    fringe = [r for r in records if r.role == "fringe"]
    chsh = [r for r in records if r.role == "chsh"]
    v0, v0_sig = _visibility_from(fringe, 0.0, 0.0, records)
    v45, v45_sig = _visibility_from(fringe, 45.0, 45.0, records)

    a, ap = CHSH_A
    b, bp = CHSH_B
    e_ab, s_ab = _correlator_from(chsh, a, b, records)
    e_abp, s_abp = _correlator_from(chsh, a, bp, records)
    e_apb, s_apb = _correlator_from(chsh, ap, b, records)
    e_apbp, s_apbp = _correlator_from(chsh, ap, bp, records)
    s = e_ab - e_abp + e_apb + e_apbp
    s_sig = math.sqrt(s_ab**2 + s_abp**2 + s_apb**2 + s_apbp**2)

    total_true = sum(max(r.raw_coincidences - r.accidental_estimate, 0.0)
                     for r in fringe)
    total_time = sum(r.duration_s for r in fringe)
    # the 4x4 analyzer grid transmits 1/4 of the detected pairs on average
    brightness = 4.0 * total_true / total_time * 60.0

    if v0 > 0.0:
        eta_hat, eta_sig = quantum.estimate_eta(v0, v0_sig, v45, v45_sig, s, s_sig)
    else:
        # no resolvable fringe: the overlap estimator is undefined
        eta_hat, eta_sig = math.nan, math.inf
    return BellResult(v0=v0, v0_sigma=v0_sig, v45=v45, v45_sigma=v45_sig,
                      s=s, s_sigma=s_sig, brightness_cpm=brightness,
                      eta_hat=eta_hat, eta_hat_sigma=eta_sig)


def run_bell_experiment(config: ExperimentConfig, jobs: int = 1):
    """Simulate the full measurement plan; returns (BellResult, records).

    Deterministic for a fixed seed; with ``jobs > 1`` the settings run on a
    thread pool and produce results identical to the serial execution.
    """
    state = config.polarization_model().state()
    overlap = config.overlap()
    entries = list(enumerate(config.plan))
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(
                lambda ie: _simulate_setting(config, state, overlap, ie[1], ie[0]),
                entries))
    else:
        records = [_simulate_setting(config, state, overlap, e, i)
                   for i, e in entries]
    return analyze_records(records), records


def run_attenuation_study(config: ExperimentConfig, per_arm_lengths_km,
                          db_per_km: float = 0.2, jobs: int = 1):
    """Repeat the experiment adding ``length * db_per_km`` dB per arm."""
    results = []
    for length in per_arm_lengths_km:
        if length < 0:
            raise InvalidParameterError("fiber length must be >= 0")
        cfg = replace(
            config,
            attenuation_db_a=config.attenuation_db_a + length * db_per_km,
            attenuation_db_b=config.attenuation_db_b + length * db_per_km,
        )
        result, _ = run_bell_experiment(cfg, jobs=jobs)
        results.append(result)
    return results


def sweep_figure2(devices, base_config: ExperimentConfig, jobs: int = 1):
    """(zeta_Q, simulated V0) per device; ``devices`` is a list of
    (name, signal_channel, idler_channel) triples sharing the base source."""
    devices = list(devices)
    if not devices:
        raise InvalidParameterError("need at least one device")
    rows = []
    for idx, (name, ch_s, ch_i) in enumerate(devices):
        cfg = replace(base_config, signal_channel=ch_s, idler_channel=ch_i,
                      pair_salt=base_config.pair_salt + idx)
        zeta = cfg.overlap().zeta_q
        result, _ = run_bell_experiment(cfg, jobs=jobs)
        rows.append({"device": name, "zeta_q": zeta,
                     "v0": result.v0, "v0_sigma": result.v0_sigma})
    return rows


def sweep_figure3(v0_grid, eta_grid, measured_points=()):
    """S = sqrt(2) V0 (1 + eta) on a grid, plus optional measured overlays."""
    v0s = np.atleast_1d(np.asarray(v0_grid, dtype=float))
    etas = np.atleast_1d(np.asarray(eta_grid, dtype=float))
    if v0s.size == 0 or etas.size == 0:
        raise InvalidParameterError("grids must be non-empty")
    if v0s.min() < 0 or v0s.max() > 1 or etas.min() < 0 or etas.max() > 1:
        raise InvalidParameterError("grid values must lie in [0, 1]")
    rows = [{"kind": "grid", "v0": float(v), "eta": float(e),
             "s": math.sqrt(2.0) * float(v) * (1.0 + float(e))}
            for v in v0s for e in etas]
    for label, v, e, s in measured_points:
        rows.append({"kind": f"measured:{label}", "v0": float(v),
                     "eta": float(e), "s": float(s)})
    return rows
