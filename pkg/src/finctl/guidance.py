"""Looped reference trajectories and the smoothing filters that shape them.

Two shapes (ellipse, Lissajous) are combined with two scenarios: ``6T``
tracks all six degrees of freedom, ``3T2S`` holds roll and pitch at zero and
points the nose at a lookahead point to get by without sway force.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .controller import TrajectoryPoint
from .math_core import Pose, euler_rate_matrix, euler_to_quat, rate_matrix, wrap_angle

SCENARIOS = ("6T", "3T2S")
SHAPES = ("ellipse", "lissajous")
DEGENERATE_LOOKAHEAD = 1e-9
YAW = 5


@dataclass(frozen=True)
class TrajectoryParams:
    A_x: float = 1.5
    A_y: float = 1.5
    A_z: float = 0.3
    omega_x: float = 0.03
    omega_y: float = 0.03
    omega_z: float = 0.03
    l_x: float = 1.25
    l_y: float = 1.25
    x0: float = 0.3
    y0: float = 0.0
    z0: float = 0.0
    c_phi: float = 0.1
    t_star: float = 0.1
    gamma1: float = 7.0
    gamma2: float = 1.0
    scenario: str = "6T"
    shape: str = "ellipse"

    def __post_init__(self):
        for name in ("A_x", "A_y", "A_z", "omega_x", "omega_y", "omega_z",
                     "l_x", "l_y", "t_star", "gamma1", "gamma2"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.scenario not in SCENARIOS:
            raise ValueError(f"scenario must be one of {SCENARIOS}")
        if self.shape not in SHAPES:
            raise ValueError(f"shape must be one of {SHAPES}")

    def with_(self, **kw) -> "TrajectoryParams":
        return replace(self, **kw)


def path_position(params: TrajectoryParams, t) -> np.ndarray:
    lx, ly = (params.l_x, params.l_y) if params.shape == "lissajous" else (1.0, 1.0)
    t = np.asarray(t, dtype=float)
    x = params.A_x * (1.0 - np.cos(lx * params.omega_x * t)) + params.x0
    y = params.A_y * np.sin(ly * params.omega_y * t) + params.y0
    z = params.A_z * (1.0 - np.cos(params.omega_z * t)) + params.z0
    return np.stack([x, y, z], axis=-1)


def analytic_setpoint(params: TrajectoryParams, t: float, robot_xy=None,
                      prev_heading=(0.0, 0.0)) -> np.ndarray:
    """Unfiltered ``[x, y, z, roll, pitch, yaw]`` at time ``t``.

    ``robot_xy`` is required for the 3T2S line-of-sight yaw.  When the
    lookahead difference degenerates, ``prev_heading`` (pitch, yaw) is held.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    p = path_position(params, t)
    ahead = path_position(params, t + params.t_star)
    pitch, yaw = prev_heading
    if params.scenario == "6T":
        d = ahead - p
        n = np.linalg.norm(d)
        if n >= DEGENERATE_LOOKAHEAD:
            pitch = np.pi / 2 - np.arccos(np.clip(-d[2] / n, -1.0, 1.0))
            yaw = np.arctan2(d[1], d[0])
        roll = params.c_phi * t
    else:
        if robot_xy is None:
            raise ValueError("3T2S yaw needs the robot position")
        d = ahead[:2] - np.asarray(robot_xy, dtype=float)
        if np.hypot(d[0], d[1]) >= DEGENERATE_LOOKAHEAD:
            yaw = np.arctan2(d[1], d[0])
        roll = pitch = 0.0
    return np.array([p[0], p[1], p[2], roll, pitch, yaw])


@dataclass
class FilterState:
    """Two cascaded second-order stages, each with value and rate."""
    x1: np.ndarray = field(default_factory=lambda: np.zeros(6))
    v1: np.ndarray = field(default_factory=lambda: np.zeros(6))
    x2: np.ndarray = field(default_factory=lambda: np.zeros(6))
    v2: np.ndarray = field(default_factory=lambda: np.zeros(6))

    @classmethod
    def at_rest(cls, eta) -> "FilterState":
        eta = np.asarray(eta, dtype=float)
        return cls(eta.copy(), np.zeros(6), eta.copy(), np.zeros(6))

    def copy(self) -> "FilterState":
        return FilterState(self.x1.copy(), self.v1.copy(), self.x2.copy(), self.v2.copy())


def _shortest(target, current):
    """Replace the yaw channel of ``target`` by its nearest equivalent to ``current``."""
    out = np.array(target, dtype=float)
    out[YAW] = current[YAW] + wrap_angle(out[YAW] - current[YAW])
    return out


def filter_step(state: FilterState, eta_p, gamma1: float, gamma2: float, dt: float):
    """Advance both stages by one Euler step.

    Returns ``(eta_d, eta_d_dot, eta_d_ddot, new_state)``; yaw stays unwrapped.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    u = _shortest(eta_p, state.x1)
    a1 = -2.0 * gamma1 * state.v1 - gamma1 ** 2 * (state.x1 - u)
    a2 = -2.0 * gamma2 * state.v2 - gamma2 ** 2 * (state.x2 - state.x1)
    new = FilterState(state.x1 + dt * state.v1, state.v1 + dt * a1,
                      state.x2 + dt * state.v2, state.v2 + dt * a2)
    acc = -2.0 * gamma2 * new.v2 - gamma2 ** 2 * (new.x2 - new.x1)
    return new.x2.copy(), new.v2.copy(), acc, new


def to_trajectory_point(eta, eta_dot, eta_ddot) -> TrajectoryPoint:
    """Convert an Euler-form setpoint and its derivatives to quaternion form.

    Angular accelerations use the slow-rotation approximation, dropping the
    terms from the time derivatives of the rate maps.
    """
    eta, eta_dot, eta_ddot = (np.asarray(a, dtype=float) for a in (eta, eta_dot, eta_ddot))
    phi, theta, psi = eta[3:]
    e = euler_rate_matrix(phi, theta)
    q = euler_to_quat(phi, theta, psi)
    t = rate_matrix(q)
    rate = np.concatenate([eta_dot[:3], t @ (e @ eta_dot[3:])])
    accel = np.concatenate([eta_ddot[:3], t @ (e @ eta_ddot[3:])])
    return TrajectoryPoint(Pose(eta[:3], q), rate, accel)


class Guidance:
    """Stateful generator: analytic setpoint, smoothing, quaternion output."""

    def __init__(self, params: TrajectoryParams):
        self.params = params
        self.heading = (0.0, 0.0)
        self.state: FilterState | None = None

    def start(self, robot_xy=None) -> np.ndarray:
        """Initialise at rest on the path start; returns the initial setpoint."""
        self.heading = (0.0, 0.0)
        eta0 = analytic_setpoint(self.params, 0.0, robot_xy, self.heading)
        self.heading = (eta0[4], eta0[5])
        self.state = FilterState.at_rest(eta0)
        return eta0

    def step(self, t: float, robot_xy, dt: float):
        if self.state is None:
            self.start(robot_xy)
        eta_p = analytic_setpoint(self.params, t, robot_xy, self.heading)
        self.heading = (eta_p[4], eta_p[5])
        eta, eta_dot, eta_ddot, self.state = filter_step(
            self.state, eta_p, self.params.gamma1, self.params.gamma2, dt)
        return eta, eta_dot, eta_ddot

    def point(self) -> TrajectoryPoint:
        s = self.state
        acc = -2.0 * self.params.gamma2 * s.v2 - self.params.gamma2 ** 2 * (s.x2 - s.x1)
        return to_trajectory_point(s.x2, s.v2, acc)
