"""Thrust-to-amplitude conversion and the per-fin CPG oscillator."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .fin_plant import N_FINS, FinGeometry, FinHydroCoeffs

A_MAX = np.pi / 2


def thrust_constant(coeffs: FinHydroCoeffs, geom: FinGeometry) -> float:
    """Thrust at which the amplitude map saturates, ``2 C_d rho S_f (r_c w)^2``."""
    return 2.0 * coeffs.C_d * coeffs.rho * geom.S_f * (geom.r_c * coeffs.omega_osc) ** 2


def force_to_amplitude(f_th, coeffs: FinHydroCoeffs | None = None,
                       geom: FinGeometry | None = None):
    coeffs = coeffs or FinHydroCoeffs()
    geom = geom or FinGeometry()
    f = np.asarray(f_th, dtype=float)
    if np.any(f < 0):
        raise ValueError("fin thrust must be non-negative")
    arg = np.clip(1.0 - f / thrust_constant(coeffs, geom), -1.0, 1.0)
    amp = np.clip(np.arccos(arg), 0.0, A_MAX)
    return float(amp) if amp.ndim == 0 else amp


def amplitude_to_force(amp, coeffs: FinHydroCoeffs | None = None,
                       geom: FinGeometry | None = None):
    coeffs = coeffs or FinHydroCoeffs()
    geom = geom or FinGeometry()
    return thrust_constant(coeffs, geom) * (1.0 - np.cos(amp))


@dataclass
class FinCommand:
    amplitude: np.ndarray
    phi0: np.ndarray
    omega: float = 4.0 * np.pi

    def __post_init__(self):
        self.amplitude = np.broadcast_to(np.asarray(self.amplitude, dtype=float), (N_FINS,)).copy()
        self.phi0 = np.broadcast_to(np.asarray(self.phi0, dtype=float), (N_FINS,)).copy()
        if np.any(self.amplitude < 0) or np.any(self.amplitude > A_MAX + 1e-12):
            raise ValueError("amplitude must lie in [0, pi/2]")
        if not self.omega > 0:
            raise ValueError("oscillation rate must be positive")


@dataclass
class CpgState:
    phase: np.ndarray = field(default_factory=lambda: np.zeros(N_FINS))
    amp: np.ndarray = field(default_factory=lambda: np.zeros(N_FINS))
    amp_rate: np.ndarray = field(default_factory=lambda: np.zeros(N_FINS))
    offset: np.ndarray = field(default_factory=lambda: np.zeros(N_FINS))
    offset_rate: np.ndarray = field(default_factory=lambda: np.zeros(N_FINS))

    def copy(self) -> "CpgState":
        return CpgState(self.phase.copy(), self.amp.copy(), self.amp_rate.copy(),
                        self.offset.copy(), self.offset_rate.copy())

    def angle(self) -> np.ndarray:
        return self.offset + self.amp * np.cos(self.phase)

    def rate(self, omega: float) -> np.ndarray:
        c, s = np.cos(self.phase), np.sin(self.phase)
        return self.offset_rate + self.amp_rate * c - self.amp * omega * s


def _critically_damped(gain: float, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact zero-order-hold discretisation of x'' = g(g/4 (u - x) - x')."""
    a = np.array([[0.0, 1.0], [-gain * gain / 4.0, -gain]])
    b = np.array([0.0, gain * gain / 4.0])
    big = np.zeros((3, 3))
    big[:2, :2] = a
    big[:2, 2] = b
    e = expm(big * dt)
    return e[:2, :2], e[:2, 2]


class Cpg:
    """Four independent second-order filters driving the paddle angles."""

    def __init__(self, k_amp: float = 10.0, k_zd: float = 3.0, dt: float = 0.01,
                 omega: float = 4.0 * np.pi):
        if k_amp <= 0 or k_zd <= 0 or dt <= 0:
            raise ValueError("CPG gains and dt must be positive")
        self.k_amp, self.k_zd, self.dt, self.omega = k_amp, k_zd, dt, omega
        self._amp_phi, self._amp_gam = _critically_damped(k_amp, dt)
        self._off_phi, self._off_gam = _critically_damped(k_zd, dt)

    def step(self, state: CpgState, cmd: FinCommand) -> tuple[CpgState, np.ndarray]:
        s = state.copy()
        s.phase = state.phase + cmd.omega * self.dt
        x = np.vstack([state.amp, state.amp_rate])
        x = self._amp_phi @ x + np.outer(self._amp_gam, cmd.amplitude)
        s.amp, s.amp_rate = x[0], x[1]
        y = np.vstack([state.offset, state.offset_rate])
        y = self._off_phi @ y + np.outer(self._off_gam, cmd.phi0)
        s.offset, s.offset_rate = y[0], y[1]
        return s, s.angle()


def cpg_step(state: CpgState, cmd: FinCommand, dt: float, k_amp: float = 10.0,
             k_zd: float = 3.0) -> tuple[CpgState, np.ndarray]:
    return Cpg(k_amp, k_zd, dt, cmd.omega).step(state, cmd)
