"""Quaternion algebra, rotation maps and pose Jacobians.

Quaternions are stored as length-4 arrays ``[mu, ex, ey, ez]`` (scalar
first, Hamilton convention).  Sign is never canonicalised: ``q`` and ``-q``
are distinct values that map to the same rotation.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

UNIT_TOL = 1e-9
GIMBAL_MARGIN = 1e-6

IDENTITY_QUAT = np.array([1.0, 0.0, 0.0, 0.0])


def skew(v) -> np.ndarray:
    """Cross-product matrix so that ``skew(a) @ b == cross(a, b)``."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def normalize(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    n = np.sqrt(q @ q)
    if not np.isfinite(n) or n == 0.0:
        raise ValueError(f"cannot normalise quaternion {q}")
    return q / n


def as_unit_quaternion(q) -> np.ndarray:
    """Validate a unit quaternion and return it as a float array."""
    q = np.asarray(q, dtype=float).reshape(4)
    if abs(np.sqrt(q @ q) - 1.0) > UNIT_TOL:
        raise ValueError(f"quaternion {q} is not unit norm")
    return q


def quat_mul(q1, q2) -> np.ndarray:
    m1, e1 = q1[0], np.asarray(q1[1:])
    m2, e2 = q2[0], np.asarray(q2[1:])
    out = np.empty(4)
    out[0] = m1 * m2 - e1 @ e2
    out[1:] = m1 * e2 + m2 * e1 + np.cross(e1, e2)
    return normalize(out)


def quat_conj(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_to_rot(q) -> np.ndarray:
    mu = q[0]
    s = skew(q[1:])
    return np.eye(3) + 2.0 * mu * s + 2.0 * (s @ s)


def rate_matrix(q) -> np.ndarray:
    """T(q) such that ``q_dot = T(q) @ w`` for body angular velocity ``w``."""
    t = np.empty((4, 3))
    t[0] = -np.asarray(q[1:])
    t[1:] = q[0] * np.eye(3) + skew(q[1:])
    return 0.5 * t


def pose_jacobian(q) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(J, J_dagger)`` with J 7x6 and its left inverse 6x7."""
    r = quat_to_rot(q)
    t = rate_matrix(q)
    j = np.zeros((7, 6))
    j[:3, :3] = r
    j[3:, 3:] = t
    jd = np.zeros((6, 7))
    jd[:3, :3] = r.T
    jd[3:, 3:] = 4.0 * t.T
    return j, jd


def euler_to_quat(phi: float, theta: float, psi: float) -> np.ndarray:
    """ZYX (yaw-pitch-roll) Euler angles to a unit quaternion."""
    cr, sr = np.cos(0.5 * phi), np.sin(0.5 * phi)
    cp, sp = np.cos(0.5 * theta), np.sin(0.5 * theta)
    cy, sy = np.cos(0.5 * psi), np.sin(0.5 * psi)
    q = np.array([
        cr * cp * cy + sr * sp * sy,
        sr * cp * cy - cr * sp * sy,
        cr * sp * cy + sr * cp * sy,
        cr * cp * sy - sr * sp * cy,
    ])
    return normalize(q)


def quat_to_euler(q) -> np.ndarray:
    """Inverse of :func:`euler_to_quat`; pitch is clipped to [-pi/2, pi/2]."""
    mu, x, y, z = q
    phi = np.arctan2(2.0 * (mu * x + y * z), 1.0 - 2.0 * (x * x + y * y))
    theta = np.arcsin(np.clip(2.0 * (mu * y - z * x), -1.0, 1.0))
    psi = np.arctan2(2.0 * (mu * z + x * y), 1.0 - 2.0 * (y * y + z * z))
    return np.array([phi, theta, psi])


def _check_gimbal(theta: float) -> None:
    if abs(theta) >= np.pi / 2 - GIMBAL_MARGIN:
        raise ValueError(f"pitch {theta} too close to +-pi/2 for the Euler rate map")


def euler_rate_matrix(phi: float, theta: float) -> np.ndarray:
    """E(phi, theta) with ``w = E @ [phi_dot, theta_dot, psi_dot]``."""
    _check_gimbal(theta)
    sphi, cphi = np.sin(phi), np.cos(phi)
    sth, cth = np.sin(theta), np.cos(theta)
    return np.array([
        [1.0, 0.0, -sth],
        [0.0, cphi, sphi * cth],
        [0.0, -sphi, cphi * cth],
    ])


def euler_rates_to_body(phi: float, theta: float, euler_rates) -> np.ndarray:
    return euler_rate_matrix(phi, theta) @ np.asarray(euler_rates, dtype=float)


def wrap_angle(a):
    return (np.asarray(a) + np.pi) % (2.0 * np.pi) - np.pi


@dataclass
class Pose:
    p: np.ndarray = field(default_factory=lambda: np.zeros(3))
    q: np.ndarray = field(default_factory=lambda: IDENTITY_QUAT.copy())

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float).reshape(3)
        self.q = as_unit_quaternion(self.q)

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.p, self.q])


@dataclass
class Twist:
    v: np.ndarray = field(default_factory=lambda: np.zeros(3))
    w: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.v = np.asarray(self.v, dtype=float).reshape(3)
        self.w = np.asarray(self.w, dtype=float).reshape(3)
        if not (np.all(np.isfinite(self.v)) and np.all(np.isfinite(self.w))):
            raise ValueError("twist has non-finite entries")

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.v, self.w])


@dataclass
class Wrench:
    f: np.ndarray = field(default_factory=lambda: np.zeros(3))
    m: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.f = np.asarray(self.f, dtype=float).reshape(3)
        self.m = np.asarray(self.m, dtype=float).reshape(3)
        if not (np.all(np.isfinite(self.f)) and np.all(np.isfinite(self.m))):
            raise ValueError("wrench has non-finite entries")

    @classmethod
    def from_array(cls, tau) -> "Wrench":
        tau = np.asarray(tau, dtype=float)
        return cls(tau[:3], tau[3:])

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.f, self.m])
