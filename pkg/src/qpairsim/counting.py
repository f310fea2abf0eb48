"""Analytic rate equations: singles, true/accidental coincidences, V_max.

Two bookkeeping modes are provided.

``mode="paper"`` evaluates the bare low-gain expressions

    P_i  = p0 * I1_i * T_i * K_T                      (singles rate, 1/s)
    P_TC = p0 * I2 * T_A * T_B * K_T * G_T            (per coincidence window)
    P_AC = (p0 I1_A T_A K_T)(p0 I1_B T_B K_T) G_T^2   (per coincidence window)

with no detector efficiency, no analyzers and no dark counts.

``mode="full"`` (default) models the gated hardware the Monte Carlo
simulates: detector quantum efficiency multiplies every photon-detection
probability, each arm's polarization analyzer transmits half the singles,
dark counts add ``dark_rate * gate_width * trigger_rate`` observed counts
per second, and — because the two detectors are gated by a common trigger —
uncorrelated clicks pile into the same gates, enhancing the accidental
rate to

    R_AC = s_A * s_B * G_T / K_T      (s_i = observed singles rates).

In full mode P_TC is half the detected pair rate per coincidence window
(the fringe C_max + C_min total), so V_max = 1/(1 + 2 P_AC/P_TC) is the
raw fringe visibility limit in both modes.

p0 is the pair generation probability density in pairs per second per GHz
of the spectral overlap measure, so p0 * I1 and p0 * I2 are rates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import (
    InsufficientDataError,
    InvalidParameterError,
    OutOfModelError,
    UndefinedVisibilityError,
)
from .spectral import PairOverlap

__all__ = [
    "SourceParams",
    "DetectorParams",
    "RateBudget",
    "singles_rate",
    "singles_probability",
    "coincidence_probabilities",
    "detected_pair_rate",
    "max_visibility",
    "brightness_cpm",
    "rate_budget",
    "subtract_accidentals",
    "accidental_product_bound",
    "slope_quality",
    "calibrate_pair_rate",
    "dead_time_survival",
]

LOW_GAIN_LIMIT = 0.1  # max arrival probability per trigger window
ANALYZER_TRANSMISSION = 0.5  # single polarizer output per arm


@dataclass(frozen=True)
class SourceParams:
    """Effective pair source.

    ``pair_rate_density`` is p0 in pairs/s per GHz: multiplied by an
    I-integral (GHz) it gives a pair rate in 1/s.
    """

    pair_rate_density: float
    pump_frequency_thz: float
    baseline_v0: float = 1.0

    def __post_init__(self):
        if self.pair_rate_density < 0:
            raise InvalidParameterError("pair rate density must be >= 0")
        if not (0.0 <= self.baseline_v0 <= 1.0):
            raise InvalidParameterError("baseline V0 must be in [0, 1]")


@dataclass(frozen=True)
class DetectorParams:
    """Gated single-photon detector."""

    quantum_efficiency: float = 0.1
    trigger_rate_hz: float = 2e6
    gate_width_s: float = 20e-9
    dead_time_s: float = 10e-6
    dark_count_rate_hz: float = 500.0
    coincidence_window_s: float = 1e-9

    def __post_init__(self):
        if not (0.0 <= self.quantum_efficiency <= 1.0):
            raise InvalidParameterError("quantum efficiency must be in [0, 1]")
        for name in ("trigger_rate_hz", "gate_width_s", "dead_time_s",
                     "dark_count_rate_hz", "coincidence_window_s"):
            if getattr(self, name) < 0:
                raise InvalidParameterError(f"{name} must be >= 0")
        if self.trigger_rate_hz * self.gate_width_s > 1.0 + 1e-12:
            raise InvalidParameterError("trigger period must be >= gate width")

    @property
    def duty_cycle(self) -> float:
        """K_T: total detection time per second."""
        return self.trigger_rate_hz * self.gate_width_s

    @property
    def dark_prob_per_gate(self) -> float:
        return self.dark_count_rate_hz * self.gate_width_s

    @property
    def dark_rate_observed_hz(self) -> float:
        """Dark counts per second of wall time under gated operation."""
        return self.dark_prob_per_gate * self.trigger_rate_hz


@dataclass(frozen=True)
class RateBudget:
    """Rates and probabilities for one channel pair at one working point."""

    p_singles_a: float        # singles rate, 1/s
    p_singles_b: float
    p_true: float             # true-coincidence probability per coincidence window
    p_accidental: float       # accidental probability per coincidence window
    v_max: float
    brightness_cpm: float     # true coincidences per minute


def _check_regime(arrival_rate: float, detector: DetectorParams):
    per_window = arrival_rate / detector.trigger_rate_hz if detector.trigger_rate_hz else 0.0
    if per_window > LOW_GAIN_LIMIT:
        raise OutOfModelError(
            f"arrival probability per trigger window {per_window:.3f} exceeds "
            f"the low-gain limit {LOW_GAIN_LIMIT}"
        )


def singles_rate(source: SourceParams, overlap: PairOverlap, detector: DetectorParams,
                 arm: str = "signal", attenuation: float = 1.0, mode: str = "full") -> float:
    """Observed singles rate on one arm, 1/s."""
    i1 = overlap.i1(arm)
    t = overlap.transmission(arm)
    arrival = source.pair_rate_density * i1 * t * attenuation
    _check_regime(arrival, detector)
    if mode == "paper":
        return arrival * detector.duty_cycle
    photon = arrival * detector.quantum_efficiency * ANALYZER_TRANSMISSION * detector.duty_cycle
    return photon + detector.dark_rate_observed_hz


def singles_probability(source: SourceParams, overlap: PairOverlap,
                        detector: DetectorParams, arm: str = "signal",
                        attenuation: float = 1.0, mode: str = "full") -> float:
    """Alias of :func:`singles_rate` under the rate-equation naming."""
    return singles_rate(source, overlap, detector, arm, attenuation, mode)


def detected_pair_rate(source: SourceParams, overlap: PairOverlap,
                       det_a: DetectorParams, det_b: DetectorParams,
                       attenuation_a: float = 1.0, attenuation_b: float = 1.0,
                       mode: str = "full") -> float:
    """Rate of pairs detected on both arms before analyzer projection, 1/s."""
    rate = (source.pair_rate_density * overlap.i2
            * overlap.t_signal * overlap.t_idler
            * attenuation_a * attenuation_b * det_a.duty_cycle)
    if mode == "full":
        rate *= det_a.quantum_efficiency * det_b.quantum_efficiency
    return rate


def coincidence_probabilities(source: SourceParams, overlap: PairOverlap,
                              det_a: DetectorParams, det_b: DetectorParams,
                              attenuation_a: float = 1.0, attenuation_b: float = 1.0,
                              mode: str = "full"):
    """(P_TC, P_AC) per coincidence window; see the module docstring."""
    if mode not in ("paper", "full"):
        raise InvalidParameterError(f"mode must be 'paper' or 'full', got {mode!r}")
    g_t = det_a.coincidence_window_s
    if mode == "paper":
        p_tc = detected_pair_rate(source, overlap, det_a, det_b,
                                  attenuation_a, attenuation_b, "paper") * g_t
        s_a = singles_rate(source, overlap, det_a, "signal", attenuation_a, "paper")
        s_b = singles_rate(source, overlap, det_b, "idler", attenuation_b, "paper")
        p_ac = s_a * s_b * g_t * g_t
        return p_tc, p_ac
    pair = detected_pair_rate(source, overlap, det_a, det_b,
                              attenuation_a, attenuation_b, "full")
    p_tc = 0.5 * pair * g_t
    s_a = singles_rate(source, overlap, det_a, "signal", attenuation_a, "full")
    s_b = singles_rate(source, overlap, det_b, "idler", attenuation_b, "full")
    p_ac = s_a * s_b * g_t * g_t / det_a.duty_cycle
    return p_tc, p_ac


def max_visibility(p_accidental: float, p_true: float) -> float:
    """V_max = 1 / (1 + 2 P_AC / P_TC)."""
    if p_true <= 0.0:
        raise UndefinedVisibilityError("P_TC must be positive")
    return 1.0 / (1.0 + 2.0 * p_accidental / p_true)


def brightness_cpm(source: SourceParams, overlap: PairOverlap,
                   det_a: DetectorParams, det_b: DetectorParams,
                   attenuation_a: float = 1.0, attenuation_b: float = 1.0,
                   mode: str = "full", include_dead_time: bool = False) -> float:
    """Predicted true-coincidence rate in counts per minute."""
    rate = detected_pair_rate(source, overlap, det_a, det_b,
                              attenuation_a, attenuation_b, mode)
    if include_dead_time and mode == "full":
        s_a = singles_rate(source, overlap, det_a, "signal", attenuation_a, "full")
        s_b = singles_rate(source, overlap, det_b, "idler", attenuation_b, "full")
        rate *= dead_time_survival(s_a, det_a.dead_time_s)
        rate *= dead_time_survival(s_b, det_b.dead_time_s)
    return rate * 60.0


def rate_budget(source: SourceParams, overlap: PairOverlap,
                det_a: DetectorParams, det_b: DetectorParams,
                attenuation_a: float = 1.0, attenuation_b: float = 1.0,
                mode: str = "full") -> RateBudget:
    p_tc, p_ac = coincidence_probabilities(source, overlap, det_a, det_b,
                                           attenuation_a, attenuation_b, mode)
    return RateBudget(
        p_singles_a=singles_rate(source, overlap, det_a, "signal", attenuation_a, mode),
        p_singles_b=singles_rate(source, overlap, det_b, "idler", attenuation_b, mode),
        p_true=p_tc,
        p_accidental=p_ac,
        v_max=max_visibility(p_ac, p_tc),
        brightness_cpm=brightness_cpm(source, overlap, det_a, det_b,
                                      attenuation_a, attenuation_b, mode),
    )


def subtract_accidentals(singles_a: float, singles_b: float, raw_coincidences: float,
                         duration_s: float, coincidence_window_s: float,
                         duty_cycle: float = 1.0) -> float:
    """Accidental-subtracted true coincidences, floored at zero.

    The estimate is (S_A / T_eff) * (S_B / T_eff) * G_T * T_eff with the
    effective duration T_eff = duration * duty_cycle, i.e. the rates the
    detectors actually see inside their gates.  The result is a lower
    bound on the distributed-pair count.
    """
    if min(singles_a, singles_b, raw_coincidences) < 0 or duration_s <= 0:
        raise InvalidParameterError("counts must be >= 0 and duration positive")
    if not (0.0 < duty_cycle <= 1.0):
        raise InvalidParameterError("duty cycle must be in (0, 1]")
    t_eff = duration_s * duty_cycle
    accidentals = singles_a * singles_b * coincidence_window_s / t_eff
    return max(raw_coincidences - accidentals, 0.0)


def accidental_product_bound(singles_a: float, singles_b: float, n_gates: float) -> float:
    """Upper bound on accidental coincidences: the product of the per-gate
    count probabilities on the two paths, summed over gates."""
    if n_gates <= 0:
        raise InvalidParameterError("n_gates must be positive")
    return singles_a * singles_b / n_gates


def slope_quality(p0_values, overlap: PairOverlap,
                  det_a: DetectorParams, det_b: DetectorParams,
                  mode: str = "paper") -> float:
    """Least-squares slope (through the origin) of 2*P_AC/P_TC vs brightness.

    The reciprocal of the slope is proportional to the pair quality factor.
    """
    p0_values = [float(p) for p in p0_values]
    if len(p0_values) < 5:
        raise InsufficientDataError(f"need >= 5 sweep points, got {len(p0_values)}")
    xs, ys = [], []
    for p0 in p0_values:
        src = SourceParams(pair_rate_density=p0, pump_frequency_thz=0.0)
        p_tc, p_ac = coincidence_probabilities(src, overlap, det_a, det_b, mode=mode)
        if p_tc <= 0:
            continue
        xs.append(brightness_cpm(src, overlap, det_a, det_b, mode=mode))
        ys.append(2.0 * p_ac / p_tc)
    if len(xs) < 5:
        raise InsufficientDataError("fewer than 5 valid sweep points")
    xs = np.asarray(xs)
    ys = np.asarray(ys)
    return float(np.dot(xs, ys) / np.dot(xs, xs))


def dead_time_survival(rate_hz: float, dead_time_s: float) -> float:
    """Throughput factor of a non-paralyzable detector: 1 / (1 + r * tau_d)."""
    return 1.0 / (1.0 + rate_hz * dead_time_s)


def calibrate_pair_rate(target_brightness_cpm: float, overlap: PairOverlap,
                        det_a: DetectorParams, det_b: DetectorParams,
                        attenuation_a: float = 1.0, attenuation_b: float = 1.0,
                        include_dead_time: bool = True) -> float:
    """p0 such that the predicted full-mode brightness matches the target.

    Dead-time throughput couples weakly to p0 through the singles rates, so
    the inversion runs a short fixed-point iteration.
    """
    if target_brightness_cpm <= 0:
        raise InvalidParameterError("target brightness must be positive")
    base = (overlap.i2 * overlap.t_signal * overlap.t_idler
            * attenuation_a * attenuation_b * det_a.duty_cycle
            * det_a.quantum_efficiency * det_b.quantum_efficiency)
    if base <= 0:
        raise InvalidParameterError("channel pair transmits no pairs")
    p0 = target_brightness_cpm / 60.0 / base
    if not include_dead_time:
        return p0
    for _ in range(8):
        src = SourceParams(pair_rate_density=p0, pump_frequency_thz=0.0)
        s_a = singles_rate(src, overlap, det_a, "signal", attenuation_a, "full")
        s_b = singles_rate(src, overlap, det_b, "idler", attenuation_b, "full")
        survival = (dead_time_survival(s_a, det_a.dead_time_s)
                    * dead_time_survival(s_b, det_b.dead_time_s))
        p0_next = target_brightness_cpm / 60.0 / (base * survival)
        if abs(p0_next - p0) <= 1e-12 * p0:
            p0 = p0_next
            break
        p0 = p0_next
    return p0
