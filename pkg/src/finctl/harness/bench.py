"""Open-loop allocation benchmark: allocator, CPG and fins, no rigid body."""
from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass

import numpy as np

from ..actuation import Cpg, CpgState, FinCommand, force_to_amplitude
from ..allocation import AllocationConfig, Allocator
from ..fin_plant import FinGeometry, FinHydroCoeffs, FinPlant
from .episode import CPG_GAINS

BENCH_WRENCH = np.array([0.5, 0.5, 0.5, 0.2, 0.2, 0.2])


def square_profile(t, amplitude=BENCH_WRENCH, half_period: float = 5.0) -> np.ndarray:
    """``amplitude`` with its sign flipped every ``half_period`` seconds."""
    sign = 1.0 if int(np.floor(t / half_period)) % 2 == 0 else -1.0
    return sign * np.asarray(amplitude, dtype=float)


@dataclass
class BenchResult:
    method: str
    mae_lin: float
    mae_ang: float
    mct_ms: float
    t: np.ndarray
    tau_des: np.ndarray
    tau_sim: np.ndarray

    def summary(self) -> dict:
        return {"method": self.method, "MAE_lin": self.mae_lin, "MAE_ang": self.mae_ang,
                "MCT": self.mct_ms}


def bench_method(method: str, profile=square_profile, duration: float = 40.0,
                 control_rate: float = 20.0, plant_dt: float = 0.01,
                 geom: FinGeometry | None = None, coeffs: FinHydroCoeffs | None = None) -> BenchResult:
    geom = geom or FinGeometry()
    coeffs = coeffs or FinHydroCoeffs()
    allocator = Allocator(method, AllocationConfig(method=method), geom)
    cpg = Cpg(*CPG_GAINS[method], dt=plant_dt, omega=coeffs.omega_osc)
    fins = FinPlant(geom, coeffs)
    sub = int(round(1.0 / (control_rate * plant_dt)))
    n = int(round(duration * control_rate))
    window = deque(maxlen=int(round(2.0 * np.pi / coeffs.omega_osc / plant_dt)))
    window_sum = np.zeros(6)
    still = np.zeros(6)
    state = CpgState()
    t_out = np.arange(n) / control_rate
    tau_des = np.zeros((n, 6))
    tau_sim = np.zeros((n, 6))
    times = np.zeros(n)
    for j in range(n):
        tau = profile(t_out[j])
        started = time.perf_counter()
        res = allocator(tau)
        times[j] = time.perf_counter() - started
        cmd = FinCommand(force_to_amplitude(np.maximum(res.thrust, 0.0), coeffs, geom),
                         res.phi0, coeffs.omega_osc)
        for _ in range(sub):
            state, angles = cpg.step(state, cmd)
            w = fins.wrench(angles, state.rate(cmd.omega), still)
            if len(window) == window.maxlen:
                window_sum -= window[0]
            window.append(w)
            window_sum += w
        tau_des[j] = tau
        tau_sim[j] = window_sum / len(window)
    err = np.abs(tau_des - tau_sim)
    return BenchResult(method, float(err[:, :3].mean()), float(err[:, 3:].mean()),
                       float(np.median(times) * 1e3), t_out, tau_des, tau_sim)


def alloc_bench(methods=("inv", "opt", "prop"), profile=square_profile, duration: float = 40.0,
                **kw) -> dict[str, BenchResult]:
    return {m: bench_method(m, profile, duration, **kw) for m in methods}
