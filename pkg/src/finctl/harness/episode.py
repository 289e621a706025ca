"""Closed-loop episode: guidance, control, allocation, fins, plant, sensors, EKF."""
from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from ..actuation import Cpg, CpgState, FinCommand, force_to_amplitude
from ..allocation import AllocationConfig, Allocator
from ..controller import (ControllerError, ControllerGains, HybridControllerState,
                          TrajectoryPoint, controller_step)
from ..dynamics import THETA_START, IntegrationError, ModelError, PlantState, RigidBody
from ..estimation import EstimationError, Estimator, SensorConfig, sample_sensors
from ..fin_plant import FinGeometry, FinHydroCoeffs, FinPlant
from ..guidance import Guidance, TrajectoryParams
from ..math_core import Pose, euler_to_quat

CPG_GAINS = {"prop": (10.0, 3.0), "opt": (10.0, 3.0), "inv": (5.0, 2.0)}


def episode_rng(seed: int, run_index: int = 0) -> np.random.Generator:
    """Per-episode PCG64 stream derived from ``(master seed, run index)``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(run_index)])))


@dataclass
class EpisodeConfig:
    trajectory: TrajectoryParams = field(default_factory=TrajectoryParams)
    method: str = "prop"
    allocation: AllocationConfig | None = None
    gains: ControllerGains | None = None
    theta_true: np.ndarray = field(default_factory=lambda: THETA_START.copy())
    theta_hat0: np.ndarray = field(default_factory=lambda: THETA_START.copy())
    duration: float = 400.0
    seed: int = 0
    run_index: int = 0
    sensors: SensorConfig = field(default_factory=SensorConfig)
    geom: FinGeometry = field(default_factory=FinGeometry)
    coeffs: FinHydroCoeffs = field(default_factory=FinHydroCoeffs)
    plant_dt: float = 0.01
    control_rate: float = 20.0
    cpg_gains: tuple | None = None
    setpoint: Pose | None = None
    initial_pose: Pose | None = None
    bypass_allocation: bool = False
    perfect_sensing: bool = False
    record_timing: bool = False

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        if self.allocation is None:
            self.allocation = AllocationConfig(method=self.method)
        if self.gains is None:
            self.gains = ControllerGains.for_method(self.method)
        if self.cpg_gains is None:
            self.cpg_gains = CPG_GAINS[self.method]
        self.theta_true = np.asarray(self.theta_true, dtype=float)
        self.theta_hat0 = np.asarray(self.theta_hat0, dtype=float)
        sub = self.control_rate * self.plant_dt
        if abs(round(1.0 / sub) - 1.0 / sub) > 1e-9:
            raise ValueError("plant steps per control step must be an integer")

    @property
    def substeps(self) -> int:
        return int(round(1.0 / (self.control_rate * self.plant_dt)))

    @property
    def n_ticks(self) -> int:
        return int(round(self.duration * self.control_rate))


@dataclass
class EpisodeRecord:
    t: np.ndarray
    eta_d: np.ndarray
    eta: np.ndarray
    eta_hat: np.ndarray
    nu: np.ndarray
    tau_des: np.ndarray
    tau_sim: np.ndarray
    amp: np.ndarray
    phi0: np.ndarray
    angle: np.ndarray
    alloc_ms: np.ndarray
    h: np.ndarray
    method: str = ""
    failed: bool = False
    message: str = ""
    timing_recorded: bool = False

    @classmethod
    def empty(cls, n: int, method: str) -> "EpisodeRecord":
        z = lambda *s: np.full((n,) + s, np.nan)
        return cls(np.full(n, np.nan), z(7), z(7), z(7), z(6), z(6), z(6), z(4), z(4), z(4),
                   np.full(n, np.nan), np.zeros(n, dtype=int), method=method)

    def truncate(self, n: int) -> "EpisodeRecord":
        for name in ("t", "eta_d", "eta", "eta_hat", "nu", "tau_des", "tau_sim",
                     "amp", "phi0", "angle", "alloc_ms", "h"):
            setattr(self, name, getattr(self, name)[:n])
        return self

    def __len__(self) -> int:
        return len(self.t)

    @property
    def fin_rotation(self) -> float:
        """Total angle swept by all fins, summed over the recorded samples."""
        if len(self.angle) < 2:
            return 0.0
        return float(np.abs(np.diff(self.angle, axis=0)).sum())


def _initial_state(cfg: EpisodeConfig, guidance: Guidance | None) -> tuple[PlantState, TrajectoryPoint]:
    start = cfg.initial_pose
    if cfg.setpoint is not None:
        start = start or cfg.setpoint
        return PlantState(p=start.p.copy(), q=start.q.copy()), TrajectoryPoint(cfg.setpoint)
    eta0 = guidance.start([cfg.trajectory.x0, cfg.trajectory.y0])
    if start is None:
        start = Pose(eta0[:3], euler_to_quat(*eta0[3:]))
    return PlantState(p=start.p.copy(), q=start.q.copy()), guidance.point()


def run_episode(cfg: EpisodeConfig) -> EpisodeRecord:
    """Simulate one closed-loop episode; deterministic given the config."""
    rng = episode_rng(cfg.seed, cfg.run_index)
    dt, sub, n_ticks = cfg.plant_dt, cfg.substeps, cfg.n_ticks
    dt_ctrl = sub * dt
    sensors = SensorConfig(sigma_pose=(0.0,) * 6, sigma_gyro=0.0) if cfg.perfect_sensing else cfg.sensors

    guidance = None if cfg.setpoint is not None else Guidance(cfg.trajectory)
    state, target = _initial_state(cfg, guidance)
    body = RigidBody(cfg.theta_true)
    fins = FinPlant(cfg.geom, cfg.coeffs)
    cpg = Cpg(*cfg.cpg_gains, dt=dt, omega=cfg.coeffs.omega_osc)
    cpg_state = CpgState()
    allocator = Allocator(cfg.method, cfg.allocation, cfg.geom)
    ctrl = HybridControllerState(theta_hat=cfg.theta_hat0.copy())
    estimator = Estimator(sensors, state.p)
    window = deque(maxlen=max(1, int(round(2.0 * np.pi / cfg.coeffs.omega_osc / dt))))
    window_sum = np.zeros(6)

    meas = sample_sensors(state, sensors, rng, 0, dt)
    q_meas = euler_to_quat(*meas.euler)
    gyro = meas.gyro
    rec = EpisodeRecord.empty(n_ticks + 1, cfg.method)
    rec.timing_recorded = cfg.record_timing
    x = state.as_vector()
    step = 0
    cmd = FinCommand(np.zeros(4), np.zeros(4), cfg.coeffs.omega_osc)
    tau_applied = np.zeros(6)
    j = 0
    try:
        for j in range(n_ticks + 1):
            t = j * dt_ctrl
            if guidance is not None:
                target = guidance.point()
            pose_hat = Pose(estimator.state.p, q_meas)
            nu_hat = np.concatenate([estimator.state.v, gyro])
            tau_des, ctrl, _ = controller_step(pose_hat, nu_hat, target, ctrl, cfg.gains, dt_ctrl)
            if cfg.bypass_allocation:
                tau_applied = tau_des
            else:
                started = time.perf_counter()
                res = allocator(tau_des)
                elapsed = time.perf_counter() - started
                amp = force_to_amplitude(np.maximum(res.thrust, 0.0), cfg.coeffs, cfg.geom)
                cmd = FinCommand(amp, res.phi0, cfg.coeffs.omega_osc)
                if cfg.record_timing:
                    rec.alloc_ms[j] = 1e3 * elapsed

            rec.t[j] = t
            rec.eta_d[j] = target.pose.as_array()
            rec.eta[j] = x[:7]
            rec.eta_hat[j, :3] = estimator.state.p
            rec.eta_hat[j, 3:] = q_meas
            rec.nu[j] = x[7:]
            rec.tau_des[j] = tau_des
            rec.tau_sim[j] = window_sum / len(window) if window else tau_applied
            rec.amp[j] = cmd.amplitude
            rec.phi0[j] = cmd.phi0
            rec.angle[j] = cpg_state.angle()
            rec.h[j] = ctrl.h
            if j == n_ticks:
                break

            for _ in range(sub):
                if not cfg.bypass_allocation:
                    cpg_state, angles = cpg.step(cpg_state, cmd)
                    rates = cpg_state.rate(cmd.omega)
                    tau_applied = fins.wrench(angles, rates, x[7:])
                if len(window) == window.maxlen:
                    window_sum -= window[0]
                window.append(tau_applied)
                window_sum += tau_applied
                x = body.step_vector(x, tau_applied, dt)
                step += 1
                state = PlantState.from_vector(x, step * dt)
                meas = sample_sensors(state, sensors, rng, step, dt)
                if meas.euler is not None:
                    q_meas = euler_to_quat(*meas.euler)
                    gyro = meas.gyro
                estimator.update(meas, q_meas, dt)
                if guidance is not None:
                    guidance.step(step * dt, estimator.state.p[:2], dt)
    except (IntegrationError, ControllerError, EstimationError, ModelError, ValueError,
            FloatingPointError) as exc:
        rec.failed = True
        rec.message = f"{type(exc).__name__} at t={j * dt_ctrl:.2f}s: {exc}"
        rec.truncate(j)
    return rec
