"""Simulated noisy sensors and a constant-velocity EKF.

The filter state is ``[p, v]`` with ``p`` in the world frame and ``v`` in the
body frame.  Attitude is an input to the prediction, not a filter state.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import PlantState
from .math_core import euler_to_quat, quat_to_euler, quat_to_rot

DEPTH = "depth"
PLANAR = "planar"
_SELECT = {DEPTH: [2], PLANAR: [0, 1]}
PSD_TOL = -1e-10


class EstimationError(RuntimeError):
    """Raised when an update would break the covariance."""


@dataclass(frozen=True)
class SensorConfig:
    sigma_pose: tuple = (0.002, 0.002, 0.002, 0.0017, 0.0017, 0.0017)
    sigma_gyro: float = 0.0017
    imu_rate: float = 100.0
    position_rate: float = 10.0
    depth_rate: float = 10.0
    sigma_Q: tuple = (0.01, 0.01, 0.01)
    sigma_R: tuple = (0.002, 0.002, 0.002)

    def __post_init__(self):
        if len(self.sigma_pose) != 6 or len(self.sigma_Q) != 3 or len(self.sigma_R) != 3:
            raise ValueError("sigma_pose needs 6 entries, sigma_Q and sigma_R need 3")
        if min(self.sigma_pose) < 0 or self.sigma_gyro < 0:
            raise ValueError("noise levels must be non-negative")
        if min(self.sigma_Q) < 0 or min(self.sigma_R) <= 0:
            raise ValueError("sigma_Q must be non-negative and sigma_R positive")
        for name in ("imu_rate", "position_rate", "depth_rate"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def q_acc(self) -> np.ndarray:
        return np.square(self.sigma_Q)

    def r_meas(self, selector: str) -> np.ndarray:
        return np.diag(np.square(np.asarray(self.sigma_R)[_SELECT[selector]]))


@dataclass
class Measurements:
    t: float
    euler: np.ndarray | None = None
    gyro: np.ndarray | None = None
    planar: np.ndarray | None = None
    depth: np.ndarray | None = None


def _every(rate: float, dt: float) -> int:
    return max(1, int(round(1.0 / (rate * dt))))


def sample_sensors(true_state: PlantState, cfg: SensorConfig, rng: np.random.Generator,
                   step: int = 0, dt: float = 0.01) -> Measurements:
    """Noisy readings due at plant step ``step`` of length ``dt``.

    Draw order per call is fixed: attitude, gyro, planar, depth.
    """
    s = np.asarray(cfg.sigma_pose, dtype=float)
    out = Measurements(true_state.time)
    if step % _every(cfg.imu_rate, dt) == 0:
        out.euler = quat_to_euler(true_state.q) + s[3:] * rng.standard_normal(3)
        out.gyro = true_state.w + cfg.sigma_gyro * rng.standard_normal(3)
    if step % _every(cfg.position_rate, dt) == 0:
        out.planar = true_state.p[:2] + s[:2] * rng.standard_normal(2)
    if step % _every(cfg.depth_rate, dt) == 0:
        out.depth = true_state.p[2:] + s[2:3] * rng.standard_normal(1)
    return out


def noisy_attitude(euler) -> np.ndarray:
    return euler_to_quat(*euler)


@dataclass
class EkfState:
    xi: np.ndarray = field(default_factory=lambda: np.zeros(6))
    P: np.ndarray = field(default_factory=lambda: np.eye(6) * 1e-4)

    def __post_init__(self):
        self.xi = np.asarray(self.xi, dtype=float).reshape(6)
        self.P = np.asarray(self.P, dtype=float).reshape(6, 6)

    @property
    def p(self) -> np.ndarray:
        return self.xi[:3]

    @property
    def v(self) -> np.ndarray:
        return self.xi[3:]


def _sym(p: np.ndarray) -> np.ndarray:
    return 0.5 * (p + p.T)


def ekf_predict(state: EkfState, q_input, dt: float, q_acc) -> EkfState:
    """Constant-velocity prediction; ``q_acc`` holds acceleration variances."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    r = quat_to_rot(q_input)
    a = np.eye(6)
    a[:3, 3:] = r * dt
    w = np.vstack([r * (0.5 * dt * dt), np.eye(3) * dt])
    xi = a @ state.xi
    p = a @ state.P @ a.T + w @ np.diag(np.asarray(q_acc, dtype=float)) @ w.T
    return EkfState(xi, _sym(p))


def ekf_correct(state: EkfState, z, selector: str, r_meas) -> EkfState:
    if selector not in _SELECT:
        raise ValueError(f"selector must be one of {tuple(_SELECT)}")
    idx = _SELECT[selector]
    z = np.atleast_1d(np.asarray(z, dtype=float))
    r_meas = np.atleast_2d(np.asarray(r_meas, dtype=float))
    h = np.zeros((len(idx), 6))
    h[np.arange(len(idx)), idx] = 1.0
    s = h @ state.P @ h.T + r_meas
    try:
        np.linalg.cholesky(s)
    except np.linalg.LinAlgError as exc:
        raise EstimationError(f"innovation covariance not positive definite: {s}") from exc
    k = np.linalg.solve(s, h @ state.P).T
    xi = state.xi + k @ (z - h @ state.xi)
    p = (np.eye(6) - k @ h) @ state.P
    return EkfState(xi, _sym(p))


def covariance_ok(p: np.ndarray, tol: float = 1e-12) -> bool:
    return bool(np.allclose(p, p.T, atol=tol) and np.linalg.eigvalsh(p).min() >= PSD_TOL)


class Estimator:
    """EKF bookkeeping for one episode: predicts every call, corrects when fixes arrive."""

    def __init__(self, cfg: SensorConfig, p0, v0=None, p_cov0=None):
        self.cfg = cfg
        p_cov0 = np.diag(np.r_[np.square(cfg.sigma_R), np.full(3, 1e-4)]) if p_cov0 is None else p_cov0
        self.state = EkfState(np.r_[np.asarray(p0, float), np.zeros(3) if v0 is None else v0], p_cov0)
        self._q_acc = cfg.q_acc
        self._r = {k: cfg.r_meas(k) for k in _SELECT}

    def update(self, meas: Measurements, q_input, dt: float) -> EkfState:
        self.state = ekf_predict(self.state, q_input, dt, self._q_acc)
        if meas.planar is not None:
            self.state = ekf_correct(self.state, meas.planar, PLANAR, self._r[PLANAR])
        if meas.depth is not None:
            self.state = ekf_correct(self.state, meas.depth, DEPTH, self._r[DEPTH])
        return self.state
