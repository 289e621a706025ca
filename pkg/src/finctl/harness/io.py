"""Episode CSV files, campaign JSON files and YAML run configurations."""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
import yaml

from ..allocation import AllocationConfig
from ..controller import ControllerGains
from ..dynamics import N_THETA
from ..estimation import SensorConfig
from ..fin_plant import FinGeometry, FinHydroCoeffs
from ..guidance import TrajectoryParams
from ..math_core import Pose, euler_to_quat
from .episode import CPG_GAINS, EpisodeConfig, EpisodeRecord


def _pose_cols(prefix: str) -> list[str]:
    return [f"{prefix}_{k}" for k in ("x", "y", "z", "qw", "qx", "qy", "qz")]


_WRENCH = ("x", "y", "z", "roll", "pitch", "yaw")
CSV_COLUMNS = (
    ["t"] + _pose_cols("des") + _pose_cols("true") + _pose_cols("est")
    + [f"nu_{k}" for k in ("u", "v", "w", "p", "q", "r")]
    + [f"tau_des_{k}" for k in _WRENCH] + [f"tau_sim_{k}" for k in _WRENCH]
    + [f"fin{i}_{k}" for i in range(1, 5) for k in ("A", "phi0", "angle")]
    + ["alloc_time_ms", "h"]
)
CSV_FORMAT = "%.12g"


class ConfigFileError(ValueError):
    """Raised for malformed or unknown configuration entries."""


def record_table(rec: EpisodeRecord) -> np.ndarray:
    fins = np.stack([rec.amp, rec.phi0, rec.angle], axis=2).reshape(len(rec), 12)
    return np.column_stack([rec.t, rec.eta_d, rec.eta, rec.eta_hat, rec.nu, rec.tau_des,
                            rec.tau_sim, fins, rec.alloc_ms, rec.h])


def write_episode_csv(rec: EpisodeRecord, path) -> Path:
    """One row per control tick; the bytes depend only on the record values."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, record_table(rec), fmt=CSV_FORMAT, delimiter=",",
               header=",".join(CSV_COLUMNS), comments="")
    return path


def read_episode_csv(path, method: str = "") -> EpisodeRecord:
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().strip().split(",")
    if header != CSV_COLUMNS:
        raise ValueError(f"{path}: unexpected CSV header")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != len(CSV_COLUMNS):
        raise ValueError(f"{path}: expected {len(CSV_COLUMNS)} columns, got {data.shape[1]}")
    c = np.cumsum([0, 1, 7, 7, 7, 6, 6, 6, 12, 1, 1])
    fins = data[:, c[7]:c[8]].reshape(-1, 4, 3)
    alloc = data[:, c[8]]
    rec = EpisodeRecord(
        data[:, 0], data[:, c[1]:c[2]], data[:, c[2]:c[3]], data[:, c[3]:c[4]],
        data[:, c[4]:c[5]], data[:, c[5]:c[6]], data[:, c[6]:c[7]],
        fins[:, :, 0], fins[:, :, 1], fins[:, :, 2], alloc, data[:, c[9]].astype(int),
        method=method, timing_recorded=bool(np.isfinite(alloc).any()))
    return rec


def _clean(obj):
    """Replace non-finite floats by ``None`` so the output is strict JSON."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_json(obj, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n")
    return path


# Configuration files -------------------------------------------------------

_TOP = {"method", "duration", "seed", "run_index", "record_timing", "trajectory", "gains",
        "allocation", "plant", "fins", "sensors", "cpg", "setpoint"}
_GAIN_KEYS = {"K_p", "k", "K_d", "Lambda", "Gamma", "varsigma", "theta_lower", "theta_upper",
              "eps_bar", "adapt", "zeta_scheme", "theta_hat0"}
_ALLOC_KEYS = {"n_d", "alpha_comp", "f_th_max", "tol", "max_iter"}
_PLANT_KEYS = {"theta", "plant_dt", "control_rate"}
_FIN_KEYS = {"x_fin", "y_fin", "psi_fin", "r_c", "S_f", "rho", "C_Lmax", "C_Dmax", "C_d",
             "omega_osc", "compliance"}
_SENSOR_KEYS = {"sigma_pose", "sigma_gyro", "imu_rate", "position_rate", "depth_rate",
                "sigma_Q", "sigma_R", "perfect"}
_CPG_KEYS = {"k_amp", "k_zd"}
_GEOM_KEYS = {"x_fin", "y_fin", "psi_fin", "r_c", "S_f"}


def _check(section: str, given: dict, allowed: set) -> dict:
    if given is None:
        return {}
    if not isinstance(given, dict):
        raise ConfigFileError(f"section {section!r} must be a mapping")
    unknown = sorted(set(given) - allowed)
    if unknown:
        raise ConfigFileError(f"unknown key(s) in {section!r}: {', '.join(unknown)}")
    return dict(given)


def _tuples(d: dict) -> dict:
    return {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}


def config_from_dict(raw: dict) -> EpisodeConfig:
    """Build an :class:`EpisodeConfig`; every key must be known."""
    top = _check("<root>", raw or {}, _TOP)
    method = top.get("method", "prop")
    traj = TrajectoryParams(**_check("trajectory", top.get("trajectory"),
                                     set(TrajectoryParams.__dataclass_fields__)))
    gains_raw = _check("gains", top.get("gains"), _GAIN_KEYS)
    theta_hat0 = gains_raw.pop("theta_hat0", None)
    kp = gains_raw.get("K_p")
    if kp is not None and len(kp) == 4:  # tuned layout: K_p with k appended
        if "k" in gains_raw:
            raise ConfigFileError("gains: give k either inside K_p or separately, not both")
        gains_raw["K_p"], gains_raw["k"] = list(kp[:3]), kp[3]
    gains = ControllerGains.for_method(method, **gains_raw)
    alloc = _check("allocation", top.get("allocation"), _ALLOC_KEYS)
    if "n_d" in alloc:
        alloc["n_d"] = tuple(alloc["n_d"])
    allocation = AllocationConfig(method=method, **alloc)
    plant = _check("plant", top.get("plant"), _PLANT_KEYS)
    fins = _check("fins", top.get("fins"), _FIN_KEYS)
    geom = FinGeometry(**{k: v for k, v in fins.items() if k in _GEOM_KEYS})
    coeffs = FinHydroCoeffs(**{k: v for k, v in fins.items() if k not in _GEOM_KEYS})
    sensors_raw = _check("sensors", top.get("sensors"), _SENSOR_KEYS)
    perfect = bool(sensors_raw.pop("perfect", False))
    sensors = SensorConfig(**_tuples(sensors_raw))
    cpg = _check("cpg", top.get("cpg"), _CPG_KEYS)
    kw = {}
    if cpg:
        k_amp, k_zd = CPG_GAINS[method]
        kw["cpg_gains"] = (cpg.get("k_amp", k_amp), cpg.get("k_zd", k_zd))
    if "theta" in plant:
        kw["theta_true"] = np.asarray(plant["theta"], dtype=float)
        if kw["theta_true"].shape != (N_THETA,):
            raise ConfigFileError(f"plant.theta needs {N_THETA} entries")
    if theta_hat0 is not None:
        kw["theta_hat0"] = np.asarray(theta_hat0, dtype=float)
    if top.get("setpoint") is not None:
        sp = _check("setpoint", top["setpoint"], {"position", "euler"})
        kw["setpoint"] = Pose(np.asarray(sp.get("position", [0, 0, 0]), float),
                              euler_to_quat(*sp.get("euler", [0, 0, 0])))
    return EpisodeConfig(
        trajectory=traj, method=method, allocation=allocation, gains=gains,
        duration=float(top.get("duration", 400.0)), seed=int(top.get("seed", 0)),
        run_index=int(top.get("run_index", 0)), sensors=sensors, geom=geom, coeffs=coeffs,
        plant_dt=float(plant.get("plant_dt", 0.01)),
        control_rate=float(plant.get("control_rate", 20.0)),
        perfect_sensing=perfect, record_timing=bool(top.get("record_timing", False)), **kw)


def load_config(path) -> EpisodeConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigFileError(f"{path}: {exc}") from exc
    if raw is not None and not isinstance(raw, dict):
        raise ConfigFileError(f"{path}: top level must be a mapping")
    try:
        return config_from_dict(raw or {})
    except TypeError as exc:
        raise ConfigFileError(f"{path}: {exc}") from exc
