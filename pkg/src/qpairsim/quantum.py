"""Two-qubit polarization states and Bell-test observables.

The state pipeline is: maximally entangled |Phi+> -> isotropic (Werner)
noise admixture parameterized by the baseline visibility V0 -> dephasing
of one photon parameterized by the wavepacket overlap eta.  The resulting
state has natural-basis visibility V0, diagonal-basis visibility eta*V0,
CHSH value sqrt(2)*V0*(1+eta) at the canonical settings and maximal CHSH
value 2*V0*sqrt(1+eta^2).

Basis order is {HH, HV, VH, VV}.  Analyzers are linear polarizers; a
physical analyzer angle theta corresponds to the Bloch angle 2*theta in
the x-z plane, so the natural (H/V) basis is Bloch angle 0 and the
diagonal basis is Bloch angle pi/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .exceptions import InvalidParameterError, UndefinedVisibilityError

__all__ = [
    "TwoQubitState",
    "MeasurementSetting",
    "PolarizationModel",
    "bell_phi_plus",
    "apply_werner",
    "apply_dephasing",
    "noisy_pair_state",
    "projector",
    "coincidence_probability",
    "correlator",
    "visibility",
    "chsh_fixed_angles",
    "chsh_optimal",
    "estimate_eta",
    "CHSH_ANGLES",
]

HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-12
EIGENVALUE_FLOOR = -1e-10

_SX = np.array([[0, 1], [1, 0]], dtype=complex)
_SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
_SZ = np.array([[1, 0], [0, -1]], dtype=complex)
_ID = np.eye(2, dtype=complex)
_PAULIS = (_SX, _SY, _SZ)

# canonical CHSH Bloch angles (a, a', b, b') in the x-z plane
CHSH_ANGLES = (0.0, math.pi / 2.0, math.pi / 4.0, 3.0 * math.pi / 4.0)


@dataclass(frozen=True, eq=False)
class TwoQubitState:
    """4x4 density matrix over {HH, HV, VH, VV}; validated on construction."""

    rho: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=complex)
        if rho.shape != (4, 4):
            raise InvalidParameterError(f"state must be 4x4, got {rho.shape}")
        if np.max(np.abs(rho - rho.conj().T)) > HERMITICITY_TOL:
            raise InvalidParameterError("state is not Hermitian")
        if abs(np.trace(rho).real - 1.0) > TRACE_TOL or abs(np.trace(rho).imag) > TRACE_TOL:
            raise InvalidParameterError("state does not have unit trace")
        if np.linalg.eigvalsh(rho).min() < EIGENVALUE_FLOOR:
            raise InvalidParameterError("state is not positive semidefinite")
        object.__setattr__(self, "rho", rho)

    def purity(self) -> float:
        return float(np.trace(self.rho @ self.rho).real)

    def to_flat(self) -> list[complex]:
        """The 16 matrix entries, row-major."""
        return [complex(z) for z in self.rho.reshape(-1)]

    @classmethod
    def from_flat(cls, values) -> "TwoQubitState":
        flat = np.asarray(list(values), dtype=complex)
        if flat.size != 16:
            raise InvalidParameterError(f"expected 16 entries, got {flat.size}")
        return cls(flat.reshape(4, 4))


@dataclass(frozen=True)
class MeasurementSetting:
    """Analyzer Bloch angles (x-z plane, radians) for the two arms."""

    alice_bloch: float
    bob_bloch: float

    def __post_init__(self):
        object.__setattr__(self, "alice_bloch", self.alice_bloch % (2.0 * math.pi))
        object.__setattr__(self, "bob_bloch", self.bob_bloch % (2.0 * math.pi))


@dataclass(frozen=True)
class PolarizationModel:
    """Source/channel polarization parameters: baseline V0 and overlap eta."""

    v0: float
    eta: float
    tau_pmd_ps: float | None = None

    def __post_init__(self):
        if not (0.0 <= self.v0 <= 1.0):
            raise InvalidParameterError(f"V0 must be in [0, 1], got {self.v0}")
        if not (0.0 <= self.eta <= 1.0):
            raise InvalidParameterError(f"eta must be in [0, 1], got {self.eta}")

    def state(self) -> TwoQubitState:
        return noisy_pair_state(self.v0, self.eta)


def bell_phi_plus() -> TwoQubitState:
    """Maximally entangled state (|HH> + |VV>)/sqrt(2) as a density matrix."""
    psi = np.zeros(4, dtype=complex)
    psi[0] = psi[3] = 1.0 / math.sqrt(2.0)
    return TwoQubitState(np.outer(psi, psi.conj()))


def apply_werner(state: TwoQubitState, v0: float) -> TwoQubitState:
    """Admix white noise: V0 * rho + (1 - V0)/4 * identity."""
    if not (0.0 <= v0 <= 1.0):
        raise InvalidParameterError(f"V0 must be in [0, 1], got {v0}")
    return TwoQubitState(v0 * state.rho + (1.0 - v0) / 4.0 * np.eye(4, dtype=complex))


def apply_dephasing(state: TwoQubitState, eta: float) -> TwoQubitState:
    """Dephase the second photon: (1+eta)/2 rho + (1-eta)/2 (1 x sz) rho (1 x sz)."""
    if not (0.0 <= eta <= 1.0):
        raise InvalidParameterError(f"eta must be in [0, 1], got {eta}")
    z = np.kron(_ID, _SZ)
    return TwoQubitState((1.0 + eta) / 2.0 * state.rho
                         + (1.0 - eta) / 2.0 * (z @ state.rho @ z))


def noisy_pair_state(v0: float, eta: float) -> TwoQubitState:
    """The distributed pair state after noise/loss and differential PMD."""
    return apply_dephasing(apply_werner(bell_phi_plus(), v0), eta)


def projector(bloch_angle: float) -> np.ndarray:
    """Linear-polarizer projector at a Bloch angle in the x-z plane."""
    return 0.5 * (_ID + math.sin(bloch_angle) * _SX + math.cos(bloch_angle) * _SZ)


def _pauli_axis(bloch_angle: float) -> np.ndarray:
    return math.sin(bloch_angle) * _SX + math.cos(bloch_angle) * _SZ


def coincidence_probability(state: TwoQubitState, setting: MeasurementSetting) -> float:
    """Tr(rho Pi_a x Pi_b) for the two analyzer projectors."""
    op = np.kron(projector(setting.alice_bloch), projector(setting.bob_bloch))
    p = float(np.trace(state.rho @ op).real)
    return min(max(p, 0.0), 1.0)


def single_arm_probability(state: TwoQubitState, bloch_angle: float, arm: str) -> float:
    """Tr(rho Pi x 1) (arm='alice') or Tr(rho 1 x Pi) (arm='bob')."""
    if arm == "alice":
        op = np.kron(projector(bloch_angle), _ID)
    elif arm == "bob":
        op = np.kron(_ID, projector(bloch_angle))
    else:
        raise InvalidParameterError(f"arm must be 'alice' or 'bob', got {arm!r}")
    return float(np.trace(state.rho @ op).real)


def correlator(state: TwoQubitState, alice_bloch: float, bob_bloch: float) -> float:
    """E(a, b) = Tr(rho sigma(a) x sigma(b)) for x-z plane measurement axes."""
    op = np.kron(_pauli_axis(alice_bloch), _pauli_axis(bob_bloch))
    return float(np.trace(state.rho @ op).real)


def visibility(state: TwoQubitState, bloch_angle: float, n_grid: int = 720) -> float:
    """Coincidence fringe contrast with one analyzer fixed at ``bloch_angle``.

    The other analyzer is scanned over a full period on a dense grid and
    both extrema are refined locally, rather than assuming a sinusoidal
    fringe.  Returns (C_max - C_min) / (C_max + C_min).
    """
    def fringe(theta):
        return coincidence_probability(state, MeasurementSetting(bloch_angle, theta))

    grid = np.linspace(0.0, 2.0 * math.pi, n_grid, endpoint=False)
    values = np.array([fringe(t) for t in grid])
    step = 2.0 * math.pi / n_grid

    def refine(idx, sign):
        lo, hi = grid[idx] - step, grid[idx] + step
        res = minimize_scalar(lambda t: sign * fringe(t), bounds=(lo, hi),
                              method="bounded", options={"xatol": 1e-12})
        return sign * res.fun

    c_max = max(values.max(), refine(int(values.argmax()), -1.0))
    c_min = min(values.min(), refine(int(values.argmin()), 1.0))
    total = c_max + c_min
    if total <= 0.0:
        raise UndefinedVisibilityError("C_max + C_min = 0; visibility undefined")
    return (c_max - c_min) / total


def chsh_fixed_angles(state: TwoQubitState) -> float:
    """CHSH combination at the canonical Bloch angles a=0, a'=pi/2, b=pi/4, b'=3pi/4."""
    a, ap, b, bp = CHSH_ANGLES
    return (correlator(state, a, b) - correlator(state, a, bp)
            + correlator(state, ap, b) + correlator(state, ap, bp))


def chsh_optimal(state: TwoQubitState) -> float:
    """Maximum CHSH value over all settings: 2*sqrt(m1+m2) from the
    correlation matrix T_ij = Tr(rho sigma_i x sigma_j)."""
    t = np.empty((3, 3))
    for i, si in enumerate(_PAULIS):
        for j, sj in enumerate(_PAULIS):
            t[i, j] = np.trace(state.rho @ np.kron(si, sj)).real
    eigs = np.sort(np.linalg.eigvalsh(t.T @ t))
    return 2.0 * math.sqrt(max(eigs[-1] + eigs[-2], 0.0))


def estimate_eta(v0, v0_sigma, v45, v45_sigma, s, s_sigma):
    """Combine the two overlap estimators eta_a = V45/V0 and
    eta_b = S/(sqrt(2) V0) - 1 by inverse-variance weighted least squares.

    Uncertainties are propagated to first order treating the three inputs
    as independent.  Returns (eta_hat, sigma) with eta_hat clamped to [0, 1].
    """
    if v0 <= 0.0:
        raise InvalidParameterError("V0 must be positive to estimate eta")
    if v0_sigma <= 0.0 or v45_sigma <= 0.0 or s_sigma <= 0.0:
        raise InvalidParameterError("uncertainties must be positive")
    eta_a = v45 / v0
    sig_a = math.hypot(v45_sigma / v0, v45 * v0_sigma / v0**2)
    eta_b = s / (math.sqrt(2.0) * v0) - 1.0
    sig_b = (eta_b + 1.0) * math.hypot(s_sigma / s, v0_sigma / v0) if s > 0 else \
        s_sigma / (math.sqrt(2.0) * v0)
    w_a, w_b = 1.0 / sig_a**2, 1.0 / sig_b**2
    eta_hat = (w_a * eta_a + w_b * eta_b) / (w_a + w_b)
    sigma = 1.0 / math.sqrt(w_a + w_b)
    return min(max(eta_hat, 0.0), 1.0), sigma
