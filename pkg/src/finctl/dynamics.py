"""Six degree-of-freedom rigid-body dynamics in Fossen form.

The 23-entry parameter vector ``theta`` (0-based here; entry ``k`` is the
model's parameter ``k+1``) holds:

====== =========================================
index  meaning
====== =========================================
0      restoring force magnitude
1..3   restoring torque parameters
4..9   diagonal inertia (surge..yaw)
10     inertia cross term
11..16 linear damping (non-positive)
17..22 quadratic damping (non-positive)
====== =========================================
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .math_core import IDENTITY_QUAT, normalize, quat_to_rot, rate_matrix, skew

N_THETA = 23
E3 = np.array([0.0, 0.0, 1.0])
SKEW_E3 = skew(E3)
SINGULAR_DET = 1e-12

THETA_START = np.array([
    0.0, 0.0, 0.0, 0.0,
    50.0, 50.0, 50.0,
    1.0, 1.0, 1.0,
    0.1,
    -5.0, -50.0, -10.0, 0.0, 0.0, -0.5,
    -10.0, -100.0, -200.0, -1.0, -1.0, -0.1,
])


class ModelError(ValueError):
    """Raised when a parameter vector does not describe a usable plant."""


class IntegrationError(RuntimeError):
    """Raised when the integrated state stops being finite."""


def as_theta(theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (N_THETA,):
        raise ValueError(f"theta must have {N_THETA} entries, got shape {theta.shape}")
    return theta


def inertia_matrix(theta) -> np.ndarray:
    m = np.diag(theta[4:10]).astype(float)
    m[0, 4] = m[4, 0] = theta[10]
    m[1, 3] = m[3, 1] = -theta[10]
    return m


def coriolis_matrix(theta, nu) -> np.ndarray:
    v, w = nu[:3], nu[3:]
    sa = skew(theta[4:7] * v)
    sw = skew(w)
    sc = theta[10] * SKEW_E3
    c = np.zeros((6, 6))
    c[:3, 3:] = sa - sw @ sc
    # The cross term below carries the opposite sign of the printed form;
    # with it C(nu) stays skew in the sense nu^T C nu = 0.
    c[3:, :3] = sa + sc @ sw
    c[3:, 3:] = skew(theta[7:10] * w)
    return c


def damping_matrix(theta, nu) -> np.ndarray:
    return -np.diag(theta[11:17]) - np.diag(theta[17:23] * np.abs(nu))


def restoring_vector(theta, q) -> np.ndarray:
    rt = quat_to_rot(q).T
    g = np.empty(6)
    g[:3] = -rt @ E3 * theta[0]
    g[3:] = -SKEW_E3 @ (rt @ theta[1:4])
    return g


def model_matrices(theta, nu, q):
    """Return ``(M, C, D, g)`` for parameters ``theta`` at twist ``nu``."""
    theta = as_theta(theta)
    nu = np.asarray(nu, dtype=float)
    return (inertia_matrix(theta), coriolis_matrix(theta, nu),
            damping_matrix(theta, nu), restoring_vector(theta, q))


def check_inertia(m: np.ndarray) -> None:
    if abs(np.linalg.det(m)) < SINGULAR_DET:
        raise ModelError("inertia matrix is singular (det < 1e-12)")


@dataclass
class PlantState:
    p: np.ndarray = field(default_factory=lambda: np.zeros(3))
    q: np.ndarray = field(default_factory=lambda: IDENTITY_QUAT.copy())
    v: np.ndarray = field(default_factory=lambda: np.zeros(3))
    w: np.ndarray = field(default_factory=lambda: np.zeros(3))
    time: float = 0.0

    @property
    def nu(self) -> np.ndarray:
        return np.concatenate([self.v, self.w])

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.p, self.q, self.v, self.w])

    @classmethod
    def from_vector(cls, x, time: float = 0.0) -> "PlantState":
        x = np.asarray(x, dtype=float)
        return cls(x[0:3].copy(), x[3:7].copy(), x[7:10].copy(), x[10:13].copy(), time)


def _state_rate(x, theta, m_inv, tau) -> np.ndarray:
    q = x[3:7]
    nu = x[7:13]
    c = coriolis_matrix(theta, nu)
    d = damping_matrix(theta, nu)
    g = restoring_vector(theta, q)
    out = np.empty(13)
    out[0:3] = quat_to_rot(q) @ nu[:3]
    out[3:7] = rate_matrix(q) @ nu[3:]
    out[7:13] = m_inv @ (tau - c @ nu - d @ nu - g)
    return out


def dynamics_deriv(state: PlantState, theta, tau):
    """Return ``(pose_rate (7,), twist_rate (6,))`` for the given input wrench."""
    theta = as_theta(theta)
    m = inertia_matrix(theta)
    check_inertia(m)
    rate = _state_rate(state.as_vector(), theta, np.linalg.inv(m), np.asarray(tau, dtype=float))
    return rate[:7], rate[7:]


def check_plant_theta(theta) -> None:
    """Reject parameter vectors that cannot describe a physical plant."""
    theta = as_theta(theta)
    if np.any(theta[4:10] <= 0):
        raise ModelError("plant inertia terms theta[4:10] must be positive")
    if np.any(theta[11:23] > 0):
        raise ModelError("plant damping terms theta[11:23] must be non-positive")


class RigidBody:
    """RK4 integrator holding a cached inverse inertia for one parameter set."""

    def __init__(self, theta):
        self.theta = as_theta(theta).copy()
        check_plant_theta(self.theta)
        m = inertia_matrix(self.theta)
        check_inertia(m)
        self.m_inv = np.linalg.inv(m)

    def rate(self, x, tau) -> np.ndarray:
        return _state_rate(x, self.theta, self.m_inv, tau)

    def step_vector(self, x, tau, dt: float) -> np.ndarray:
        k1 = self.rate(x, tau)
        k2 = self.rate(x + 0.5 * dt * k1, tau)
        k3 = self.rate(x + 0.5 * dt * k2, tau)
        k4 = self.rate(x + dt * k3, tau)
        out = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(out)):
            raise IntegrationError(f"non-finite plant state after RK4 step: {out}")
        out[3:7] = normalize(out[3:7])
        return out

    def step(self, state: PlantState, tau, dt: float) -> PlantState:
        if dt <= 0:
            raise ValueError("dt must be positive")
        x = self.step_vector(state.as_vector(), np.asarray(tau, dtype=float), dt)
        return PlantState.from_vector(x, state.time + dt)


def rk4_step(state: PlantState, theta, tau, dt: float = 0.01) -> PlantState:
    return RigidBody(theta).step(state, tau, dt)
