"""Hybrid adaptive tracking controller.

The law combines a potential-based feedback on the configuration error, a
filtered reference-velocity error ``zeta``, a regressor feedforward
``Phi @ theta_hat`` with projected gradient adaptation, and a hysteretic
switch ``h`` that selects which of ``+-1_q`` the attitude is driven to.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import E3, N_THETA, SKEW_E3, THETA_START, as_theta
from .math_core import Pose, pose_jacobian, quat_conj, quat_mul, quat_to_rot, skew

HYSTERESIS = 0.1
ZETA_SCHEMES = ("exact", "euler")

THETA_LOWER = np.array([
    -2.0, -1.0, -1.0, -1.0,
    0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
    -5.0, -10.0, -50.0, -10.0, -5.0, -5.0, -0.5,
    -50.0, -500.0, -500.0, -2.0, -5.0, -1.0,
])
THETA_UPPER = np.array([
    2.0, 1.0, 1.0, 1.0,
    100.0, 100.0, 100.0, 5.0, 5.0, 5.0,
    5.0,
    0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
    0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
])
BOUNDARY_LAYER = np.array([
    0.1, 0.1, 0.1, 0.1,
    10.0, 10.0, 10.0, 0.5, 0.5, 0.5,
    0.1,
    1.0, 1.0, 1.0, 0.1, 0.1, 0.1,
    5.0, 10.0, 10.0, 0.1, 0.1, 0.1,
])

# K_p holds the three position gains followed by the attitude gain k.
_PRESETS = {
    "prop": ([3.81, 3.39, 3.76, 3.93], [3.46, 4.59, 4.41, 2.01, 3.39, 4.68]),
    "opt": ([4.25, 3.04, 2.79, 4.14], [2.8, 4.0, 4.35, 1.89, 3.43, 3.7]),
    "inv": ([17.45, 4.31, 7.41, 14.65], [16.02, 48.5, 8.83, 18.35, 6.07, 42.41]),
}


class ControllerError(RuntimeError):
    """Raised when the control law produces a non-finite output."""


@dataclass
class ConfigError:
    p_e: np.ndarray
    q_e: np.ndarray

    @property
    def mu(self) -> float:
        return float(self.q_e[0])

    @property
    def eps(self) -> np.ndarray:
        return self.q_e[1:]


@dataclass
class ControllerGains:
    K_p: np.ndarray = field(default_factory=lambda: np.array(_PRESETS["prop"][0][:3]))
    k: float = _PRESETS["prop"][0][3]
    K_d: np.ndarray = field(default_factory=lambda: np.array(_PRESETS["prop"][1]))
    Lambda: np.ndarray = field(default_factory=lambda: np.ones(6))
    Gamma: np.ndarray = field(default_factory=lambda: np.ones(N_THETA))
    varsigma: float = HYSTERESIS
    theta_lower: np.ndarray = field(default_factory=lambda: THETA_LOWER.copy())
    theta_upper: np.ndarray = field(default_factory=lambda: THETA_UPPER.copy())
    eps_bar: np.ndarray = field(default_factory=lambda: BOUNDARY_LAYER.copy())
    adapt: bool = True
    zeta_scheme: str = "exact"

    def __post_init__(self):
        self.K_p = np.asarray(self.K_p, dtype=float).reshape(3)
        self.K_d = np.asarray(self.K_d, dtype=float).reshape(6)
        self.Lambda = np.broadcast_to(np.asarray(self.Lambda, dtype=float), (6,)).copy()
        self.Gamma = np.broadcast_to(np.asarray(self.Gamma, dtype=float), (N_THETA,)).copy()
        self.theta_lower = as_theta(self.theta_lower).copy()
        self.theta_upper = as_theta(self.theta_upper).copy()
        self.eps_bar = as_theta(self.eps_bar).copy()
        for name in ("K_p", "K_d", "Lambda", "Gamma", "eps_bar"):
            if np.any(getattr(self, name) <= 0):
                raise ValueError(f"{name} must be strictly positive")
        if not self.k > 0:
            raise ValueError("k must be strictly positive")
        if not 0.0 < self.varsigma < 1.0:
            raise ValueError("hysteresis half-width must lie in (0, 1)")
        if self.zeta_scheme not in ZETA_SCHEMES:
            raise ValueError(f"zeta_scheme must be one of {ZETA_SCHEMES}")
        if np.any(self.theta_lower > self.theta_upper):
            raise ValueError("theta_lower must not exceed theta_upper")

    @classmethod
    def for_method(cls, method: str, **overrides) -> "ControllerGains":
        if method not in _PRESETS:
            raise ValueError(f"unknown allocation method {method!r}")
        kp, kd = _PRESETS[method]
        base = dict(K_p=kp[:3], k=kp[3], K_d=kd)
        base.update(overrides)
        return cls(**base)

    @property
    def lo(self) -> np.ndarray:
        return self.theta_lower - self.eps_bar

    @property
    def hi(self) -> np.ndarray:
        return self.theta_upper + self.eps_bar


@dataclass
class HybridControllerState:
    zeta: np.ndarray = field(default_factory=lambda: np.zeros(6))
    theta_hat: np.ndarray = field(default_factory=lambda: THETA_START.copy())
    h: int = 1

    def __post_init__(self):
        self.zeta = np.asarray(self.zeta, dtype=float).reshape(6)
        self.theta_hat = as_theta(self.theta_hat).astype(float)
        if self.h not in (-1, 1):
            raise ValueError("h must be -1 or +1")

    def copy(self) -> "HybridControllerState":
        return HybridControllerState(self.zeta.copy(), self.theta_hat.copy(), self.h)


@dataclass
class TrajectoryPoint:
    """Desired pose with its 7-dim rate and acceleration."""
    pose: Pose
    rate: np.ndarray = field(default_factory=lambda: np.zeros(7))
    accel: np.ndarray = field(default_factory=lambda: np.zeros(7))

    def __post_init__(self):
        self.rate = np.asarray(self.rate, dtype=float).reshape(7)
        self.accel = np.asarray(self.accel, dtype=float).reshape(7)


def config_error(pose: Pose, desired: Pose) -> ConfigError:
    rd = quat_to_rot(desired.q)
    p_e = rd.T @ (desired.p - pose.p)
    q_e = quat_mul(quat_conj(desired.q), pose.q)
    return ConfigError(p_e, q_e)


def reference_velocity(desired_rates, desired_accels, q_d):
    """Body-frame reference twist and its derivative under slow rotation."""
    _, jd = pose_jacobian(q_d)
    return jd @ np.asarray(desired_rates, dtype=float), jd @ np.asarray(desired_accels, dtype=float)


def potential(err: ConfigError, h: int, gains: ControllerGains) -> float:
    return 2.0 * gains.k * (1.0 - h * err.mu) + 0.5 * err.p_e @ (gains.K_p * err.p_e)


def potential_and_gradient(err: ConfigError, h: int, gains: ControllerGains):
    """Potential and its gradient with respect to the body twist.

    The linear part is ``-R(q_e)^T K_p p_e``: since ``p_e`` is measured from
    the vehicle toward the target, moving the body along ``v`` changes it as
    ``-R(q_e) v``.  The angular part is ``k h eps_e``.
    """
    grad = np.empty(6)
    grad[:3] = -quat_to_rot(err.q_e).T @ (gains.K_p * err.p_e)
    grad[3:] = gains.k * h * err.eps
    return potential(err, h, gains), grad


def hybrid_flow_or_jump(err: ConfigError, h: int, varsigma: float = HYSTERESIS) -> tuple[int, bool]:
    """Return ``(h_next, jumped)``; at most one jump per evaluation."""
    if h * err.mu <= -varsigma:
        return -h, True
    return h, False


def regressor(nu, nu_m, nu_m_dot, q) -> np.ndarray:
    """6x23 matrix with ``Phi @ theta = M nu_m_dot + C(nu) nu_m + D(nu) nu_m + g(q)``."""
    nu = np.asarray(nu, dtype=float)
    v, w = nu[:3], nu[3:]
    vm, wm = nu_m[:3], nu_m[3:]
    phi = np.zeros((6, N_THETA))
    rt = quat_to_rot(q).T
    phi[:3, 0] = -rt @ E3
    for k in range(3):
        ek = np.eye(3)[k]
        phi[3:, 1 + k] = -SKEW_E3 @ rt[:, k]
        a = v[k] * ek
        phi[k, 4 + k] += nu_m_dot[k]
        phi[:3, 4 + k] += np.cross(a, wm)
        phi[3:, 4 + k] += np.cross(a, vm)
        b = w[k] * ek
        phi[3 + k, 7 + k] += nu_m_dot[3 + k]
        phi[3:, 7 + k] += np.cross(b, wm)
    col = np.zeros(6)
    col[0] += nu_m_dot[4]
    col[4] += nu_m_dot[0]
    col[1] -= nu_m_dot[3]
    col[3] -= nu_m_dot[1]
    col[:3] -= np.cross(w, np.cross(E3, wm))
    col[3:] += np.cross(E3, np.cross(w, vm))
    phi[:, 10] = col
    for k in range(6):
        phi[k, 11 + k] = -nu_m[k]
        phi[k, 17 + k] = -abs(nu[k]) * nu_m[k]
    return phi


def project(theta_hat, update, gains: ControllerGains) -> np.ndarray:
    """Smooth componentwise projection; identity strictly inside the box."""
    out = np.array(update, dtype=float)
    over = theta_hat - gains.theta_upper
    under = gains.theta_lower - theta_hat
    up = (over > 0) & (out > 0)
    dn = (under > 0) & (out < 0)
    out[up] *= np.clip(1.0 - over[up] / gains.eps_bar[up], 0.0, 1.0)
    out[dn] *= np.clip(1.0 - under[dn] / gains.eps_bar[dn], 0.0, 1.0)
    return out


@dataclass
class ControllerOutput:
    tau: np.ndarray
    V: float
    jumped: bool
    err: ConfigError


def zeta_update(zeta, dV, gains: ControllerGains, dt: float) -> np.ndarray:
    """Advance ``Lambda zeta' = -(dV + K_d zeta)`` over ``dt`` with ``dV`` held.

    ``"exact"`` is the zero-order-hold solution of this linear ODE and is stable
    for any step; ``"euler"`` diverges once ``K_d dt / Lambda`` exceeds 2.
    """
    rate = gains.K_d / gains.Lambda
    if gains.zeta_scheme == "euler":
        return zeta - dt * (dV + gains.K_d * zeta) / gains.Lambda
    decay = np.exp(-rate * dt)
    return decay * zeta - (1.0 - decay) * dV / gains.K_d


def controller_step(pose: Pose, twist, target: TrajectoryPoint, state: HybridControllerState,
                    gains: ControllerGains, dt: float):
    """One step of the hybrid adaptive law; ``theta_hat`` uses explicit Euler.

    Returns ``(tau_des, new_state, info)``.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    nu = np.asarray(twist.as_array() if hasattr(twist, "as_array") else twist, dtype=float)
    err = config_error(pose, target.pose)
    h, jumped = hybrid_flow_or_jump(err, state.h, gains.varsigma)
    V, dV = potential_and_gradient(err, h, gains)
    nu_r, nu_r_dot = reference_velocity(target.rate, target.accel, target.pose.q)
    zeta_dot = -(dV + gains.K_d * state.zeta) / gains.Lambda
    nu_m = nu_r + state.zeta
    nu_m_dot = nu_r_dot + zeta_dot
    delta = nu - nu_m
    phi = regressor(nu, nu_m, nu_m_dot, pose.q)
    tau = phi @ state.theta_hat - dV - gains.K_d * delta
    if not np.all(np.isfinite(tau)):
        raise ControllerError(f"non-finite control output {tau} (err={err}, state={state})")

    new = state.copy()
    new.h = h
    new.zeta = zeta_update(state.zeta, dV, gains, dt)
    if gains.adapt:
        raw = -(phi.T @ delta) / gains.Gamma
        new.theta_hat = np.clip(state.theta_hat + dt * project(state.theta_hat, raw, gains),
                                gains.lo, gains.hi)
    return tau, new, ControllerOutput(tau, V, jumped, err)
