"""Demultiplexer channel spectra and the pair-overlap integrals.

A channel is described by its peak-normalized intensity transmission
tau(nu) (max tau = 1; the physical peak transmission T is kept separately),
its center frequency and its band edges.  From one or two channels the
module computes

* ``I1 = (1/2pi) * integral of tau over the band``  (GHz),
* ``I2 = (1/2pi) * integral of tau_s(nu - nu_sC) * tau_i(nu_p - nu - nu_iC)``
  over the signal band (GHz), maximal when the channel pair is symmetric
  about half the pump frequency,
* the pair quality factor ``zeta_Q = I2^2 / (I1_s * I1_i) * T_s * T_i``,

as well as the Fourier-limited temporal wavepacket of a channel (the
L2-normalized magnitude of the Fourier transform of sqrt(tau)) and the
wavepacket overlap ``eta(tau_PMD)`` between two channels.

Units: center frequencies in THz, widths and integrals in GHz, times in ps.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .exceptions import (
    DegenerateChannelError,
    InvalidParameterError,
    QuadratureError,
    ResolutionError,
)

__all__ = [
    "ChannelSpectrum",
    "TemporalProfile",
    "PairOverlap",
    "TimeGrid",
    "make_channel",
    "tabulated_channel",
    "load_channel_csv",
    "integral_I1",
    "integral_I2",
    "pair_overlap",
    "quality_factor",
    "temporal_profile",
    "pmd_overlap",
    "intensity_fwhm",
]

THZ_TO_GHZ = 1e3
QUAD_ABS_TOL = 1e-10  # absolute tolerance relative to the integrand scale
SHAPES = ("rectangular", "gaussian", "flattop", "tabulated")


@dataclass(frozen=True, eq=False)
class ChannelSpectrum:
    """One demultiplexer output channel.

    ``tau`` is the transmission curve divided by its peak, so max tau = 1;
    the physical peak transmission lives in ``peak_transmission``.
    """

    shape: str
    center_thz: float
    band_start_thz: float
    band_stop_thz: float
    peak_transmission: float
    width_ghz: float
    order: int = 4                      # super-gaussian order for flat-top
    pmd_delay_ps: float = 0.0
    grid_offset_ghz: np.ndarray | None = field(default=None, repr=False)
    grid_tau: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise InvalidParameterError(f"unknown channel shape {self.shape!r}")
        if not (0.0 < self.peak_transmission <= 1.0):
            raise InvalidParameterError(
                f"peak transmission must be in (0, 1], got {self.peak_transmission}"
            )
        if self.width_ghz <= 0:
            raise InvalidParameterError(f"width must be positive, got {self.width_ghz}")
        if not (self.band_start_thz < self.center_thz < self.band_stop_thz):
            raise InvalidParameterError("band edges must straddle the center frequency")
        if self.shape == "tabulated":
            off, tau = self.grid_offset_ghz, self.grid_tau
            if off is None or tau is None:
                raise InvalidParameterError("tabulated channel needs a sampled curve")
            if off.ndim != 1 or off.shape != tau.shape or off.size < 3:
                raise InvalidParameterError("tabulated grid must be 1-d with >= 3 samples")
            if np.any(np.diff(off) <= 0):
                raise InvalidParameterError("tabulated frequency grid must be strictly increasing")
            if np.any(tau < 0) or np.any(tau > 1 + 1e-12):
                raise InvalidParameterError("tabulated transmission must lie in [0, 1]")
            lo = (self.band_start_thz - self.center_thz) * THZ_TO_GHZ
            hi = (self.band_stop_thz - self.center_thz) * THZ_TO_GHZ
            if off[0] > lo + 1e-9 or off[-1] < hi - 1e-9:
                raise InvalidParameterError("tabulated grid must cover the full band")

    @property
    def band_span_ghz(self) -> float:
        return (self.band_stop_thz - self.band_start_thz) * THZ_TO_GHZ

    def tau(self, offset_ghz):
        """Peak-normalized transmission at ``offset_ghz`` from the center."""
        x = np.asarray(offset_ghz, dtype=float)
        if self.shape == "rectangular":
            out = (np.abs(x) <= self.width_ghz / 2.0).astype(float)
        elif self.shape == "gaussian":
            out = np.exp(-4.0 * math.log(2.0) * (x / self.width_ghz) ** 2)
        elif self.shape == "flattop":
            # super-gaussian exp(-(2 dnu / w)^(2m)) with w chosen so the
            # width parameter is the FWHM, matching the other shapes
            out = np.exp(-math.log(2.0) * (2.0 * x / self.width_ghz) ** (2 * self.order))
        else:
            out = np.interp(x, self.grid_offset_ghz, self.grid_tau, left=0.0, right=0.0)
        lo = (self.band_start_thz - self.center_thz) * THZ_TO_GHZ
        hi = (self.band_stop_thz - self.center_thz) * THZ_TO_GHZ
        out = np.where((x < lo) | (x > hi), 0.0, out)
        return out if out.ndim else float(out)

    def _breakpoints_ghz(self):
        """Integration breakpoints (discontinuities / kinks) as offsets."""
        if self.shape == "rectangular":
            return [-self.width_ghz / 2.0, self.width_ghz / 2.0]
        if self.shape == "tabulated":
            return list(self.grid_offset_ghz)
        return []


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid specification for temporal profiles (ps)."""

    span_ps: float
    spacing_ps: float

    def __post_init__(self):
        if self.span_ps <= 0 or self.spacing_ps <= 0:
            raise InvalidParameterError("time grid span and spacing must be positive")
        if self.spacing_ps >= self.span_ps:
            raise InvalidParameterError("time grid spacing must be smaller than the span")


@dataclass(frozen=True, eq=False)
class TemporalProfile:
    """Sampled wavepacket amplitude f(t) with unit L2 norm (1/sqrt(ps))."""

    times_ps: np.ndarray
    amplitude: np.ndarray
    spacing_ps: float

    def __post_init__(self):
        norm = float(np.sum(self.amplitude**2) * self.spacing_ps)
        if abs(norm - 1.0) > 1e-9:
            raise InvalidParameterError(f"profile is not L2-normalized (norm^2 = {norm})")


@dataclass(frozen=True)
class PairOverlap:
    """Spectral overlap measures for one signal/idler channel pair."""

    i1_signal: float
    i1_idler: float
    i2: float
    zeta_q: float
    t_signal: float
    t_idler: float

    def i1(self, arm: str) -> float:
        if arm == "signal":
            return self.i1_signal
        if arm == "idler":
            return self.i1_idler
        raise InvalidParameterError(f"arm must be 'signal' or 'idler', got {arm!r}")

    def transmission(self, arm: str) -> float:
        return self.t_signal if arm == "signal" else self.t_idler


def make_channel(shape, center_thz, width_ghz, peak_transmission=1.0,
                 band_margin=3.0, order=4, pmd_delay_ps=0.0) -> ChannelSpectrum:
    """Build an analytic channel with band edges at center +- band_margin*width/2.

    ``width_ghz`` is the FWHM for gaussian and flat-top shapes and the full
    width for the rectangular shape.
    """
    if width_ghz <= 0:
        raise InvalidParameterError(f"width must be positive, got {width_ghz}")
    if not (0.0 < peak_transmission <= 1.0):
        raise InvalidParameterError(
            f"peak transmission must be in (0, 1], got {peak_transmission}"
        )
    if band_margin < 1.0:
        raise InvalidParameterError(f"band margin must be >= 1, got {band_margin}")
    if shape == "flattop" and order < 1:
        raise InvalidParameterError("flat-top order must be >= 1")
    half = band_margin * width_ghz / 2.0 / THZ_TO_GHZ
    return ChannelSpectrum(
        shape=shape,
        center_thz=center_thz,
        band_start_thz=center_thz - half,
        band_stop_thz=center_thz + half,
        peak_transmission=peak_transmission,
        width_ghz=width_ghz,
        order=order,
        pmd_delay_ps=pmd_delay_ps,
    )


def load_channel_csv(path):
    """Read one channel CSV (header ``frequency_THz,transmission``).

    Returns (frequencies_thz, transmissions) as float arrays.  Raises
    IngestionError-compatible ValueErrors naming the offending line; the
    device-level wrapper in :mod:`qpairsim.devices` adds file context.
    """
    freqs, trans = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header[:2]] != ["frequency_THz", "transmission"]:
            raise InvalidParameterError("line 1: expected header 'frequency_THz,transmission'")
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) < 2:
                raise InvalidParameterError(f"line {lineno}: expected two columns")
            try:
                f = float(row[0])
                t = float(row[1])
            except ValueError:
                raise InvalidParameterError(f"line {lineno}: non-numeric value") from None
            if not (0.0 <= t <= 1.0):
                raise InvalidParameterError(f"line {lineno}: transmission out of range")
            if freqs and f <= freqs[-1]:
                raise InvalidParameterError(f"line {lineno}: frequency grid not strictly increasing")
            freqs.append(f)
            trans.append(t)
    if len(freqs) < 3:
        raise InvalidParameterError("fewer than 3 samples in channel curve")
    return np.asarray(freqs), np.asarray(trans)


def tabulated_channel(freqs_thz, transmission, pmd_delay_ps=0.0) -> ChannelSpectrum:
    """Build a channel from a measured transmission curve.

    The curve is normalized by its peak (the peak becomes T); the center is
    the transmission-weighted centroid and the band is the sampled extent.
    """
    freqs = np.asarray(freqs_thz, dtype=float)
    trans = np.asarray(transmission, dtype=float)
    peak = float(trans.max())
    if peak <= 0:
        raise DegenerateChannelError("tabulated channel has zero transmission everywhere")
    tau = trans / peak
    center = float(np.sum(freqs * trans) / np.sum(trans))
    widths = freqs[tau >= 0.5]
    width_ghz = float((widths[-1] - widths[0]) * THZ_TO_GHZ) if widths.size >= 2 else \
        float((freqs[-1] - freqs[0]) * THZ_TO_GHZ)
    return ChannelSpectrum(
        shape="tabulated",
        center_thz=center,
        band_start_thz=float(freqs[0]),
        band_stop_thz=float(freqs[-1]),
        peak_transmission=peak,
        width_ghz=max(width_ghz, 1e-9),
        pmd_delay_ps=pmd_delay_ps,
        grid_offset_ghz=(freqs - center) * THZ_TO_GHZ,
        grid_tau=tau,
    )


def _quad_checked(fn, lo, hi, points):
    pts = sorted(p for p in set(points) if lo < p < hi)
    scale = max(hi - lo, 1.0)
    try:
        val, err = quad(fn, lo, hi, points=pts or None, epsabs=QUAD_ABS_TOL * scale,
                        epsrel=1e-10, limit=200)
    except Exception as exc:  # pragma: no cover - scipy-internal failures
        raise QuadratureError(f"quadrature failed: {exc}") from exc
    if err > max(QUAD_ABS_TOL * scale * 10.0, abs(val) * 1e-6):
        raise QuadratureError(
            f"quadrature error estimate {err:.3e} above tolerance", estimate=val
        )
    return val


def integral_I1(channel: ChannelSpectrum) -> float:
    """Band integral (1/2pi) * int tau(nu - nu_C) dnu, in GHz."""
    lo = (channel.band_start_thz - channel.center_thz) * THZ_TO_GHZ
    hi = (channel.band_stop_thz - channel.center_thz) * THZ_TO_GHZ
    if channel.shape == "tabulated":
        off, tau = channel.grid_offset_ghz, channel.grid_tau
        mask = (off >= lo) & (off <= hi)
        val = float(np.trapezoid(tau[mask], off[mask]))
    else:
        val = _quad_checked(channel.tau, lo, hi, channel._breakpoints_ghz())
    return val / (2.0 * math.pi)


def integral_I2(signal: ChannelSpectrum, idler: ChannelSpectrum,
                pump_frequency_thz: float) -> float:
    """Pair overlap integral (1/2pi) * int tau_s(nu - nu_sC) tau_i(nu_p - nu - nu_iC) dnu.

    Integration runs over the signal band; the idler curve is evaluated at
    the energy-conserving partner frequency.  Maximal when the pair centers
    are symmetric about nu_p / 2.  Result in GHz.
    """
    span = signal.band_span_ghz + idler.band_span_ghz
    detune = (pump_frequency_thz - signal.center_thz - idler.center_thz) * THZ_TO_GHZ
    if abs(detune) > 2.0 * span:
        raise InvalidParameterError(
            f"pump detuning {detune:.1f} GHz exceeds twice the combined band span"
        )
    lo = (signal.band_start_thz - signal.center_thz) * THZ_TO_GHZ
    hi = (signal.band_stop_thz - signal.center_thz) * THZ_TO_GHZ

    def integrand(x):
        # x: signal offset from its own center; partner offset from idler center
        return signal.tau(x) * idler.tau(detune - x)

    if signal.shape == "tabulated" or idler.shape == "tabulated":
        grids = []
        if signal.shape == "tabulated":
            grids.append(signal.grid_offset_ghz)
        if idler.shape == "tabulated":
            grids.append(detune - idler.grid_offset_ghz)
        x = np.unique(np.concatenate(grids + [np.linspace(lo, hi, 2001)]))
        x = x[(x >= lo) & (x <= hi)]
        val = float(np.trapezoid(integrand(x), x))
    else:
        points = signal._breakpoints_ghz() + [detune - p for p in idler._breakpoints_ghz()]
        val = _quad_checked(integrand, lo, hi, points)
    return val / (2.0 * math.pi)


def pair_overlap(signal: ChannelSpectrum, idler: ChannelSpectrum,
                 pump_frequency_thz: float) -> PairOverlap:
    """Compute I1 for both arms, I2 and the quality factor for a pair."""
    i1s = integral_I1(signal)
    i1i = integral_I1(idler)
    if i1s <= 0 or i1i <= 0:
        raise DegenerateChannelError("channel with zero band integral")
    i2 = integral_I2(signal, idler, pump_frequency_thz)
    zeta = (i2 * i2) / (i1s * i1i) * signal.peak_transmission * idler.peak_transmission
    return PairOverlap(
        i1_signal=i1s,
        i1_idler=i1i,
        i2=i2,
        zeta_q=zeta,
        t_signal=signal.peak_transmission,
        t_idler=idler.peak_transmission,
    )


def quality_factor(signal: ChannelSpectrum, idler: ChannelSpectrum,
                   pump_frequency_thz: float) -> float:
    """Pair quality factor zeta_Q = I2^2 / (I1_s I1_i) * T_s * T_i."""
    return pair_overlap(signal, idler, pump_frequency_thz).zeta_q


def _default_grid(channel: ChannelSpectrum) -> TimeGrid:
    t_limit = 1e3 / channel.width_ghz  # transform-limited duration scale, ps
    span = 40.0 * t_limit
    return TimeGrid(span_ps=span, spacing_ps=span / 4096.0)


def temporal_profile(channel: ChannelSpectrum, grid: TimeGrid | None = None) -> TemporalProfile:
    """Fourier-limited temporal wavepacket of a channel.

    Returns the L2-normalized magnitude of the Fourier transform of the
    amplitude spectrum sqrt(tau).  For a 100 GHz gaussian channel the
    resulting intensity FWHM is 4.41 ps.
    """
    if grid is None:
        grid = _default_grid(channel)
    t_limit = 1e3 / channel.width_ghz
    if grid.span_ps < 10.0 * t_limit:
        raise ResolutionError(
            f"grid span {grid.span_ps:.2f} ps < 10x transform-limited duration {t_limit:.2f} ps"
        )
    n_t = int(round(grid.span_ps / grid.spacing_ps)) + 1
    times = (np.arange(n_t) - (n_t - 1) / 2.0) * grid.spacing_ps

    lo = (channel.band_start_thz - channel.center_thz) * THZ_TO_GHZ
    hi = (channel.band_stop_thz - channel.center_thz) * THZ_TO_GHZ
    n_nu = 4097
    nu = np.linspace(lo, hi, n_nu)
    amp = np.sqrt(np.clip(channel.tau(nu), 0.0, None))
    # f(t) = | int sqrt(tau(nu)) exp(-2pi i nu t) dnu |; nu in GHz, t in ps
    phase = np.exp(-2j * math.pi * 1e-3 * np.outer(times, nu))
    f = np.abs(phase @ amp) * (nu[1] - nu[0])
    norm = math.sqrt(float(np.sum(f * f) * grid.spacing_ps))
    if norm <= 0:
        raise DegenerateChannelError("channel transmitted no power in its band")
    f /= norm

    profile = TemporalProfile(times_ps=times, amplitude=f, spacing_ps=grid.spacing_ps)
    fwhm = intensity_fwhm(profile)
    if fwhm / grid.spacing_ps < 8.0:
        raise ResolutionError(
            f"only {fwhm / grid.spacing_ps:.1f} samples across the {fwhm:.2f} ps FWHM (need >= 8)"
        )
    return profile


def intensity_fwhm(profile: TemporalProfile) -> float:
    """FWHM of the intensity profile f(t)^2, with linear interpolation."""
    inten = profile.amplitude**2
    peak = inten.max()
    half = peak / 2.0
    above = np.nonzero(inten >= half)[0]
    i0, i1 = above[0], above[-1]
    t = profile.times_ps

    def cross(j, k):
        # half-max crossing between samples j and k
        return t[j] + (half - inten[j]) * (t[k] - t[j]) / (inten[k] - inten[j])

    left = cross(i0 - 1, i0) if i0 > 0 else t[0]
    right = cross(i1 + 1, i1) if i1 < inten.size - 1 else t[-1]
    return float(right - left)


def _resample(profile: TemporalProfile, times_ps: np.ndarray) -> np.ndarray:
    return np.interp(times_ps, profile.times_ps, profile.amplitude, left=0.0, right=0.0)


def pmd_overlap(signal_profile: TemporalProfile, idler_profile: TemporalProfile,
                tau_pmd_ps: float) -> float:
    """Wavepacket overlap eta = int f_s(t) f_i(tau_PMD - t) dt.

    Both profiles carry unit L2 norm, so eta lies in [0, 1] and equals 1
    for identical symmetric profiles at tau_PMD = 0.  The idler profile is
    resampled onto the signal grid when the grids differ.
    """
    t = signal_profile.times_ps
    f_s = signal_profile.amplitude
    f_i = _resample(idler_profile, tau_pmd_ps - t)
    eta = float(np.sum(f_s * f_i) * signal_profile.spacing_ps)
    return min(max(eta, 0.0), 1.0)


def solve_pmd_delay(signal_profile: TemporalProfile, idler_profile: TemporalProfile,
                    eta_target: float) -> float:
    """Invert eta(tau_PMD) for the delay giving a target overlap (>= 0 branch)."""
    if not (0.0 < eta_target <= 1.0):
        raise InvalidParameterError(f"eta target must be in (0, 1], got {eta_target}")
    if eta_target >= pmd_overlap(signal_profile, idler_profile, 0.0):
        return 0.0
    hi = signal_profile.times_ps[-1] - signal_profile.times_ps[0]
    return float(brentq(
        lambda tau: pmd_overlap(signal_profile, idler_profile, tau) - eta_target,
        0.0, hi, xtol=1e-10,
    ))
