"""Per-episode tracking, effort, timing and allocation-accuracy metrics."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..fin_plant import FinGeometry
from ..math_core import quat_to_euler, wrap_angle

METRIC_NAMES = ("RMSE_lin", "RMSE_ang", "MEM_lin", "MEM_ang", "MAW", "MW", "MCT",
                "MAE_lin", "MAE_ang", "fin_rotation")


@dataclass
class MetricsReport:
    RMSE_lin: float
    RMSE_ang: float
    MEM_lin: float
    MEM_ang: float
    MAW: float
    MW: float
    MCT: float
    MAE_lin: float
    MAE_ang: float
    fin_rotation: float

    def as_dict(self) -> dict:
        return asdict(self)


def tracking_errors(eta_d, eta_hat) -> tuple[np.ndarray, np.ndarray]:
    """Position and wrapped Euler-angle errors between 7-column pose series."""
    eta_d = np.atleast_2d(np.asarray(eta_d, dtype=float))
    eta_hat = np.atleast_2d(np.asarray(eta_hat, dtype=float))
    lin = eta_d[:, :3] - eta_hat[:, :3]
    e_d = np.array([quat_to_euler(q) for q in eta_d[:, 3:]])
    e_h = np.array([quat_to_euler(q) for q in eta_hat[:, 3:]])
    return lin, wrap_angle(e_d - e_h)


def rmse(err: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.sum(err * err, axis=1))))


def mem(err: np.ndarray) -> float:
    return float(np.max(np.linalg.norm(err, axis=1)))


def compute_metrics(record, geom: FinGeometry | None = None) -> MetricsReport:
    """Metrics for one episode record.

    Allocation time is the median over calls that were timed; it is ``nan``
    when the record carries no timing.
    """
    if record is None or len(record) == 0:
        raise ValueError("cannot compute metrics of an empty record")
    geom = geom or FinGeometry()
    lin, ang = tracking_errors(record.eta_d, record.eta_hat)
    wrench = np.linalg.norm(record.tau_sim / geom.torque_normalizer(), axis=1)
    diff = np.abs(np.asarray(record.tau_des) - np.asarray(record.tau_sim))
    times = np.asarray(record.alloc_ms, dtype=float)
    times = times[np.isfinite(times)]
    return MetricsReport(
        RMSE_lin=rmse(lin), RMSE_ang=rmse(ang), MEM_lin=mem(lin), MEM_ang=mem(ang),
        MAW=float(wrench.mean()), MW=float(wrench.max()),
        MCT=float(np.median(times)) if times.size else float("nan"),
        MAE_lin=float(diff[:, :3].mean()), MAE_ang=float(diff[:, 3:].mean()),
        fin_rotation=float(record.fin_rotation),
    )
