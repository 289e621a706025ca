"""Lift/drag simulation of the four oscillating paddles.

Fin rest frames
---------------
Each fin ``i`` sits at ``p_i = [x_i, y_i, 0]`` in the body frame and its rest
frame is the body frame yawed by ``psi_i``.  The paddle oscillates about the
rest-frame y axis, so every fin force lies in the rest-frame x-z plane.  A
zero direction ``phi0`` points the period-averaged thrust along
``[cos(phi0), 0, sin(phi0)]``.

The per-fin signs are chosen so that the summed fin forces reproduce the
six-row allocation matrix used by :mod:`finctl.allocation` column by column:

====  ======  ======  ============
fin   x_i     y_i     psi_i
====  ======  ======  ============
1     +x      -y      -psi
2     -x      -y      psi - pi
3     -x      +y      pi - psi
4     +x      +y      psi
====  ======  ======  ============

Paddle flow model
-----------------
The paddle tip points opposite the instantaneous fin angle and its centroid
moves with the tangential speed ``r_c * rate``.  A rigid paddle swept back
and forth in still water has zero period-averaged thrust, so the paddle is
given a compliance ``c``: the effective paddle direction leans toward the
incoming flow as ``t + c * u_hat``.  ``c = 0`` is the rigid paddle.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .math_core import skew

N_FINS = 4
X_SIGN = np.array([1.0, -1.0, -1.0, 1.0])
Y_SIGN = np.array([-1.0, -1.0, 1.0, 1.0])
NO_FLOW = 1e-6


@dataclass(frozen=True)
class FinHydroCoeffs:
    rho: float = 997.0
    C_Lmax: float = 1.65
    C_Dmax: float = 3.2
    C_d: float = 0.24
    omega_osc: float = 4.0 * np.pi
    compliance: float = 1.5

    def __post_init__(self):
        for name in ("rho", "C_Lmax", "C_Dmax", "C_d", "omega_osc"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.compliance < 0:
            raise ValueError("compliance must be non-negative")


@dataclass(frozen=True)
class FinGeometry:
    x_fin: float = 0.25
    y_fin: float = 0.20
    psi_fin: float = np.pi / 4
    r_c: float = 0.1
    S_f: float = 0.02

    def __post_init__(self):
        if self.x_fin <= 0 or self.y_fin <= 0:
            raise ValueError("x_fin and y_fin are mounting magnitudes and must be positive")
        if self.r_c <= 0 or self.S_f <= 0:
            raise ValueError("r_c and S_f must be positive")
        for value, label in ((np.sin(self.psi_fin), "sin(psi_fin)"),
                             (np.cos(self.psi_fin), "cos(psi_fin)"),
                             (self.M_a, "M_a")):
            if abs(value) < 1e-9:
                raise ValueError(f"{label} must be non-zero")

    @property
    def M_a(self) -> float:
        return self.x_fin * np.sin(self.psi_fin) - self.y_fin * np.cos(self.psi_fin)

    @property
    def x(self) -> np.ndarray:
        return self.x_fin * X_SIGN

    @property
    def y(self) -> np.ndarray:
        return self.y_fin * Y_SIGN

    @property
    def psi(self) -> np.ndarray:
        p = self.psi_fin
        return np.array([-p, p - np.pi, np.pi - p, p])

    @property
    def positions(self) -> np.ndarray:
        return np.column_stack([self.x, self.y, np.zeros(N_FINS)])

    @property
    def yaw_lever(self) -> np.ndarray:
        """Yaw moment per unit horizontal fin force, ``x_i sin psi_i - y_i cos psi_i``."""
        psi = self.psi
        return self.x * np.sin(psi) - self.y * np.cos(psi)

    def rotation(self, i: int) -> np.ndarray:
        c, s = np.cos(self.psi[i]), np.sin(self.psi[i])
        return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])

    def adjoint(self, i: int) -> np.ndarray:
        """Map a rest-frame wrench of fin ``i`` to the body frame."""
        r = self.rotation(i)
        ad = np.zeros((6, 6))
        ad[:3, :3] = r
        ad[3:, :3] = skew(self.positions[i]) @ r
        ad[3:, 3:] = r
        return ad

    def torque_normalizer(self) -> np.ndarray:
        """Divisors turning a wrench into force-equivalent units."""
        return np.array([1.0, 1.0, 1.0, self.y_fin, self.x_fin, abs(self.M_a)])


def _check_index(fin_index: int) -> int:
    if fin_index not in (1, 2, 3, 4):
        raise ValueError(f"fin index must be 1..4, got {fin_index}")
    return fin_index - 1


def _mount_velocity_xz(body_twist, geom: FinGeometry) -> np.ndarray:
    """Rest-frame (x, z) velocity of each fin mount, shape (4, 2)."""
    nu = np.asarray(body_twist, dtype=float)
    v, w = nu[:3], nu[3:]
    pos = geom.positions
    vel = v + np.cross(w, pos)
    psi = geom.psi
    vx = np.cos(psi) * vel[:, 0] + np.sin(psi) * vel[:, 1]
    return np.column_stack([vx, vel[:, 2]])


def _flow(angle, rate, mount_xz, r_c: float, compliance: float):
    """Vectorised flow geometry; returns ``(U, beta, alpha)`` arrays."""
    ca, sa = np.cos(angle), np.sin(angle)
    tip = np.column_stack([-ca, -sa])
    tangential = (r_c * rate)[:, None] * np.column_stack([sa, -ca])
    u = -(mount_xz + tangential)
    speed = np.hypot(u[:, 0], u[:, 1])
    beta = np.arctan2(u[:, 0], u[:, 1])
    alpha = np.zeros_like(speed)
    live = speed >= NO_FLOW
    if np.any(live):
        uh = u[live] / speed[live, None]
        t = tip[live] + compliance * uh
        t /= np.hypot(t[:, 0], t[:, 1])[:, None]
        n = np.column_stack([-t[:, 1], t[:, 0]])
        n_u = n[:, 0] * uh[:, 0] + n[:, 1] * uh[:, 1]
        b = beta[live]
        n_l = n[:, 0] * np.cos(b) - n[:, 1] * np.sin(b)
        mag = np.arcsin(np.clip(np.abs(n_u), 0.0, 1.0))
        sign = np.where(n_u * n_l < 0.0, -1.0, 1.0)
        alpha[live] = sign * mag
    speed = np.where(live, speed, 0.0)
    return speed, beta, alpha


def fin_flow(fin_angle: float, fin_rate: float, body_twist, geom: FinGeometry,
             fin_index: int, coeffs: FinHydroCoeffs | None = None):
    """Relative flow seen by one paddle: ``(U_f, beta, alpha_aoa)``.

    ``beta`` is the flow direction in the rest-frame x-z plane measured from
    +z toward +x.  ``alpha_aoa`` is the signed incidence between the flow and
    the effective paddle plane; its sign selects the lift side.
    """
    k = _check_index(fin_index)
    coeffs = coeffs or FinHydroCoeffs()
    mount = _mount_velocity_xz(body_twist, geom)[k:k + 1]
    u, b, a = _flow(np.array([fin_angle], dtype=float), np.array([fin_rate], dtype=float),
                    mount, geom.r_c, coeffs.compliance)
    return float(u[0]), float(b[0]), float(a[0])


def lift_drag(U_f, alpha_aoa, coeffs: FinHydroCoeffs, geom: FinGeometry):
    q = 0.5 * coeffs.rho * np.square(U_f) * geom.S_f
    lift = q * coeffs.C_Lmax * np.sin(2.0 * alpha_aoa)
    drag = q * coeffs.C_Dmax * (1.0 - np.cos(2.0 * alpha_aoa))
    return lift, drag


def fin_force(U_f, beta, alpha_aoa, coeffs: FinHydroCoeffs, geom: FinGeometry):
    """Rest-frame ``(fx, fz)`` of a paddle from its flow state."""
    if np.any(np.asarray(U_f) < 0):
        raise ValueError("flow speed must be non-negative")
    lift, drag = lift_drag(U_f, alpha_aoa, coeffs, geom)
    fx = drag * np.sin(beta) + lift * np.cos(beta)
    fz = -lift * np.sin(beta) + drag * np.cos(beta)
    return fx, fz


class FinPlant:
    """Vectorised paddle forces for one geometry, for use inside the sim loop."""

    def __init__(self, geom: FinGeometry | None = None, coeffs: FinHydroCoeffs | None = None):
        self.geom = geom or FinGeometry()
        self.coeffs = coeffs or FinHydroCoeffs()
        psi = self.geom.psi
        self._cos = np.cos(psi)
        self._sin = np.sin(psi)
        self._x = self.geom.x
        self._y = self.geom.y

    def rest_forces(self, angles, rates, body_twist) -> tuple[np.ndarray, np.ndarray]:
        mount = _mount_velocity_xz(body_twist, self.geom)
        u, beta, alpha = _flow(np.asarray(angles, dtype=float), np.asarray(rates, dtype=float),
                               mount, self.geom.r_c, self.coeffs.compliance)
        return fin_force(u, beta, alpha, self.coeffs, self.geom)

    def body_wrench_from_rest(self, fx, fz) -> np.ndarray:
        """Sum of adjoint-mapped ``[fx, 0, fz, 0, 0, 0]`` over the fins."""
        bx = self._cos * fx
        by = self._sin * fx
        tau = np.empty(6)
        tau[0] = bx.sum()
        tau[1] = by.sum()
        tau[2] = fz.sum()
        tau[3] = np.sum(self._y * fz)
        tau[4] = -np.sum(self._x * fz)
        tau[5] = np.sum(self._x * by - self._y * bx)
        return tau

    def wrench(self, angles, rates, body_twist) -> np.ndarray:
        fx, fz = self.rest_forces(angles, rates, body_twist)
        return self.body_wrench_from_rest(fx, fz)


def plant_wrench(fin_states, body_twist, geom: FinGeometry | None = None,
                 coeffs: FinHydroCoeffs | None = None) -> np.ndarray:
    """Body wrench of four fins given ``fin_states`` rows of ``(angle, rate)``."""
    geom = geom or FinGeometry()
    fin_states = np.asarray(fin_states, dtype=float)
    if fin_states.shape != (N_FINS, 2):
        raise ValueError("fin_states must have shape (4, 2)")
    plant = FinPlant(geom, coeffs)
    fx, fz = plant.rest_forces(fin_states[:, 0], fin_states[:, 1], body_twist)
    tau = np.zeros(6)
    for i in range(N_FINS):
        tau += geom.adjoint(i) @ np.array([fx[i], 0.0, fz[i], 0.0, 0.0, 0.0])
    return tau
