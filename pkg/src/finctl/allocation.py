"""Control allocation: desired body wrench -> per-fin thrust and zero direction.

Three interchangeable allocators are provided (``inv``, ``opt``, ``prop``)
along with the averaged forward model they invert.  All of them work on the
split ``X = [f_i cos(phi0_i) (4), f_i sin(phi0_i) (4)]`` of fin thrusts into
horizontal and vertical rest-frame parts.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .fin_plant import N_FINS, FinGeometry
from .math_core import wrap_angle

METHODS = ("inv", "opt", "prop")
IDLE_THRUST = 1e-9

# Sign pattern of the printed six-row matrix; the roll row is written for the
# fin layout in which fins 1 and 2 sit at negative y (see fin_plant).
SIGN_MATRIX = np.array([
    [1, -1, -1, 1, 0, 0, 0, 0],
    [-1, -1, 1, 1, 0, 0, 0, 0],
    [0, 0, 0, 0, 1, 1, 1, 1],
    [0, 0, 0, 0, -1, -1, 1, 1],
    [0, 0, 0, 0, -1, 1, 1, -1],
    [-1, 1, -1, 1, 0, 0, 0, 0],
], dtype=float)


def row_scales(geom: FinGeometry) -> np.ndarray:
    """Right-hand-side divisors of the matrix form, one per wrench row."""
    return np.array([np.cos(geom.psi_fin), np.sin(geom.psi_fin), 1.0,
                     geom.y_fin, geom.x_fin, geom.M_a])


def allocation_matrix(geom: FinGeometry) -> np.ndarray:
    """6x8 map from ``X`` to the body wrench built from the fin layout."""
    psi = geom.psi
    a = np.zeros((6, 2 * N_FINS))
    a[0, :4] = np.cos(psi)
    a[1, :4] = np.sin(psi)
    a[5, :4] = geom.yaw_lever
    a[2, 4:] = 1.0
    a[3, 4:] = geom.y
    a[4, 4:] = -geom.x
    return a


@dataclass
class AllocationConfig:
    method: str = "prop"
    n_d: tuple = (2, 2, 4, 4, 4, 2)
    alpha_comp: float = 30.0
    f_th_max: float = 5.0
    tol: float = 1e-6
    max_iter: int = 200

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown allocation method {self.method!r}")
        self.n_d = tuple(int(n) for n in self.n_d)
        if len(self.n_d) != 6 or any(n not in (2, 4) for n in self.n_d):
            raise ValueError("n_d needs six entries from {2, 4}")
        if self.alpha_comp < 0:
            raise ValueError("alpha_comp must be non-negative")
        if self.f_th_max <= 0:
            raise ValueError("f_th_max must be positive")


@dataclass
class AllocationResult:
    thrust: np.ndarray
    phi0: np.ndarray
    iterations: int = 0
    residual: float = 0.0
    wall_time: float = 0.0
    converged: bool = True
    info: dict = field(default_factory=dict)

    def split(self) -> np.ndarray:
        return np.concatenate([self.thrust * np.cos(self.phi0), self.thrust * np.sin(self.phi0)])


def forward_wrench(result: AllocationResult, geom: FinGeometry) -> np.ndarray:
    """Body wrench of the period-averaged fin thrusts via the fin adjoints."""
    tau = np.zeros(6)
    for i in range(N_FINS):
        f = result.thrust[i]
        c, s = np.cos(result.phi0[i]), np.sin(result.phi0[i])
        tau += geom.adjoint(i) @ np.array([f * c, 0.0, f * s, 0.0, 0.0, 0.0])
    return tau


def forward_wrench_matrix(result: AllocationResult, geom: FinGeometry) -> np.ndarray:
    """Same map evaluated through the six-row sign matrix."""
    return row_scales(geom) * (SIGN_MATRIX @ result.split())


def heaviside_gate(tau_component: float, sign_selector: float, n_d: int) -> float:
    if n_d == 4:
        return tau_component
    if n_d != 2:
        raise ValueError("n_d must be 2 or 4")
    return 2.0 * tau_component if np.sign(sign_selector) * tau_component > 0 else 0.0


def _per_fin_divisors(geom: FinGeometry):
    psi = geom.psi
    return np.cos(psi), np.sin(psi), geom.yaw_lever, geom.y, geom.x


def _finish(f_hor, f_ver, prev: AllocationResult | None, started: float, geom,
            tau, **kw) -> AllocationResult:
    thrust = 0.25 * np.hypot(f_hor, f_ver)
    raw = np.arctan2(f_ver, f_hor)
    prev_phi = prev.phi0 if prev is not None else np.zeros(N_FINS)
    phi0 = prev_phi + wrap_angle(raw - prev_phi)
    phi0 = np.where(thrust > 0.0, phi0, prev_phi)
    res = AllocationResult(thrust, phi0, **kw)
    res.wall_time = time.perf_counter() - started
    return res


def alloc_pseudo_inverse(tau_des, geom: FinGeometry,
                         prev: AllocationResult | None = None) -> AllocationResult:
    started = time.perf_counter()
    tau = np.asarray(tau_des, dtype=float)
    c, s, m, y, x = _per_fin_divisors(geom)
    f_hor = tau[0] / c + tau[1] / s + tau[5] / m
    f_ver = tau[2] + tau[3] / y - tau[4] / x
    return _finish(f_hor, f_ver, prev, started, geom, tau)


def compensation_force(tau, cfg: AllocationConfig) -> float:
    f_norm = np.abs(np.asarray(tau, dtype=float)[[2, 4, 5]]) / cfg.f_th_max
    return float(cfg.alpha_comp * np.sum((1.0 - f_norm) * np.abs(f_norm)))


def alloc_proposed(tau_des, cfg: AllocationConfig, geom: FinGeometry,
                   prev: AllocationResult | None = None) -> AllocationResult:
    """Gated analytic allocation with horizontal force compensation.

    Surge, sway and yaw use the fin pair whose divisor sign matches the
    demand when their ``n_d`` is 2; heave pairs diagonal fins.  Roll and
    pitch are never gated, so their ``n_d`` entries have no effect.
    """
    started = time.perf_counter()
    tau = np.asarray(tau_des, dtype=float)
    c, s, m, y, x = _per_fin_divisors(geom)
    n = cfg.n_d
    f_hor = np.empty(N_FINS)
    f_ver = np.empty(N_FINS)
    for i in range(N_FINS):
        f_hor[i] = (heaviside_gate(tau[0], c[i], n[0]) / c[i]
                    + heaviside_gate(tau[1], s[i], n[1]) / s[i]
                    + heaviside_gate(tau[5], m[i], n[5]) / m[i])
        f_ver[i] = heaviside_gate(tau[2], -m[i], n[2]) + tau[3] / y[i] - tau[4] / x[i]
    f_comp = compensation_force(tau, cfg)
    return _finish(f_comp + f_hor, f_ver, prev, started, geom, tau, info={"f_comp": f_comp})


class _OptProblem:
    """Thrust minimisation over the four fins.

    The decision vector ``(f_i, Gamma_i, Lambda_i)`` is solved in the lifted
    form ``u_i = Gamma_i f_i``, ``w_i = Lambda_i f_i``: the wrench constraints
    become linear, ``f_i^2 = u_i^2 + w_i^2`` makes the cost a plain squared
    norm and the thrust bound becomes a disc, so every local solution is the
    global one.  ``f``, ``Gamma`` and ``Lambda`` are recovered exactly from
    ``(u, w)``.
    """

    def __init__(self, tau, geom: FinGeometry, cfg: AllocationConfig):
        self.tau = tau
        self.a = allocation_matrix(geom)
        self.f_max = cfg.f_th_max

    @staticmethod
    def objective(x):
        return float(x @ x)

    @staticmethod
    def objective_grad(x):
        return 2.0 * x

    def residual(self, x) -> np.ndarray:
        return self.a @ x - self.tau

    def residual_cost(self, x):
        r = self.residual(x)
        return float(r @ r), 2.0 * self.a.T @ r

    def thrust_margin(self, x) -> np.ndarray:
        return self.f_max ** 2 - x[:4] ** 2 - x[4:] ** 2

    @staticmethod
    def thrust_margin_jac(x) -> np.ndarray:
        return -2.0 * np.hstack([np.diag(x[:4]), np.diag(x[4:])])

    def _margin(self):
        return {"type": "ineq", "fun": self.thrust_margin, "jac": self.thrust_margin_jac}

    def solve(self, x0, cfg: AllocationConfig):
        return minimize(
            self.objective, x0, jac=self.objective_grad, method="SLSQP",
            constraints=[{"type": "eq", "fun": self.residual, "jac": lambda x: self.a},
                         self._margin()],
            options={"ftol": cfg.tol, "maxiter": cfg.max_iter},
        )

    def solve_saturated(self, x0, cfg: AllocationConfig):
        """Closest reachable wrench when the demand exceeds the thrust bound."""
        return minimize(
            self.residual_cost, x0, jac=True, method="SLSQP", constraints=[self._margin()],
            options={"ftol": cfg.tol ** 2, "maxiter": cfg.max_iter},
        )

    def clip(self, x) -> np.ndarray:
        """Pull each fin back onto its thrust disc."""
        f = np.hypot(x[:4], x[4:])
        scale = np.minimum(1.0, self.f_max / np.maximum(f, 1e-300))
        return x * np.tile(scale, 2)


RESIDUAL_TOL = 1e-4


def alloc_optimization(tau_des, cfg: AllocationConfig, geom: FinGeometry,
                       prev: AllocationResult | None = None) -> AllocationResult:
    """SQP thrust minimisation from an all-zero initial iterate.

    A demand outside the reachable set falls back to the reachable wrench
    nearest to it and is flagged ``converged=False``.
    """
    started = time.perf_counter()
    tau = np.asarray(tau_des, dtype=float)
    prev_phi = prev.phi0 if prev is not None else np.zeros(N_FINS)
    if not np.any(tau):
        res = AllocationResult(np.zeros(N_FINS), prev_phi.copy())
        res.wall_time = time.perf_counter() - started
        return res
    prob = _OptProblem(tau, geom, cfg)
    iterations = 0
    # The least-norm split is the optimum whenever it respects the thrust
    # bound.  Otherwise the demand may be out of reach, which the cheap
    # saturated solve settles before the main solve burns its iteration cap.
    if np.any(prob.thrust_margin(np.linalg.pinv(prob.a) @ tau) < 0.0):
        sat = prob.solve_saturated(np.zeros(8), cfg)
        iterations += int(sat.nit)
        x = prob.clip(sat.x)
        resid = float(np.linalg.norm(prob.residual(x)))
        if resid > RESIDUAL_TOL:
            return _opt_result(x, resid, iterations, prev_phi, started)
    sol = prob.solve(np.zeros(8), cfg)
    x = prob.clip(sol.x)
    iterations += int(sol.nit)
    resid = float(np.linalg.norm(prob.residual(x)))
    return _opt_result(x, resid, iterations, prev_phi, started)


def _opt_result(x, resid, iterations, prev_phi, started) -> AllocationResult:
    f = np.hypot(x[:4], x[4:])
    raw = np.arctan2(x[4:], x[:4])
    phi0 = prev_phi + wrap_angle(raw - prev_phi)
    phi0 = np.where(f > IDLE_THRUST, phi0, prev_phi)
    res = AllocationResult(f, phi0, iterations=iterations, residual=resid,
                           converged=resid <= RESIDUAL_TOL)
    res.wall_time = time.perf_counter() - started
    return res


class Allocator:
    """Stateful wrapper that remembers the previous command for unwrapping.

    Follows the estimator convention of exposing ``get_params``/``set_params``
    and a ``transform`` that maps one wrench to one :class:`AllocationResult`.
    """

    def __init__(self, method: str = "prop", config: AllocationConfig | None = None,
                 geom: FinGeometry | None = None):
        self.config = config or AllocationConfig(method=method)
        if config is not None and config.method != method:
            self.config = AllocationConfig(**{**config.__dict__, "method": method})
        self.geom = geom or FinGeometry()
        self.prev: AllocationResult | None = None

    @property
    def method(self) -> str:
        return self.config.method

    def get_params(self, deep: bool = True) -> dict:
        return {"method": self.method, "config": self.config, "geom": self.geom}

    def set_params(self, **params) -> "Allocator":
        for key, value in params.items():
            if key == "method":
                self.config = AllocationConfig(**{**self.config.__dict__, "method": value})
            elif key in ("config", "geom"):
                setattr(self, key, value)
            else:
                raise ValueError(f"unknown parameter {key!r}")
        return self

    def reset(self) -> None:
        self.prev = None

    def transform(self, tau_des) -> AllocationResult:
        if self.method == "inv":
            res = alloc_pseudo_inverse(tau_des, self.geom, self.prev)
        elif self.method == "prop":
            res = alloc_proposed(tau_des, self.config, self.geom, self.prev)
        else:
            res = alloc_optimization(tau_des, self.config, self.geom, self.prev)
        self.prev = res
        return res

    __call__ = transform
