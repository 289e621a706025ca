"""Monte Carlo campaigns over randomly drawn trajectories."""
from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from ..allocation import METHODS
from ..guidance import SCENARIOS, SHAPES, TrajectoryParams
from .episode import EpisodeConfig, EpisodeRecord, run_episode
from .metrics import METRIC_NAMES, MetricsReport, compute_metrics

log = logging.getLogger(__name__)

DESK_RUNS, DESK_DURATION = 20, 100.0
FULL_RUNS, FULL_DURATION = 500, 400.0
_SAMPLING_STREAM = 1


@dataclass(frozen=True)
class ParameterRanges:
    """Uniform sampling bounds; ``x0`` and the lookahead are fixed."""
    A_x: tuple = (0.5, 2.5)
    A_y: tuple = (0.5, 2.5)
    A_z: tuple = (0.1, 0.5)
    omega_x: tuple = (0.01, 0.05)
    omega_y: tuple = (0.01, 0.05)
    omega_z: tuple = (0.01, 0.05)
    l_x: tuple = (0.5, 2.0)
    l_y: tuple = (0.5, 2.0)
    c_phi: tuple = (0.05, 0.15)
    x0: float = 0.3
    t_star: float = 0.1

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple) and not (len(value) == 2 and 0 < value[0] <= value[1]):
                raise ValueError(f"{f.name} must be a positive (low, high) pair")


def sampling_rng(seed: int, run_index: int) -> np.random.Generator:
    """Trajectory-sampling stream, independent of the episode noise stream."""
    ss = np.random.SeedSequence([int(seed), int(run_index), _SAMPLING_STREAM])
    return np.random.Generator(np.random.PCG64(ss))


def sample_trajectory(rng: np.random.Generator, ranges: ParameterRanges = ParameterRanges(),
                      base: TrajectoryParams | None = None) -> TrajectoryParams:
    """Pick a scenario and shape, then draw every ranged parameter uniformly.

    The draw order is fixed so a given stream always yields the same trajectory.
    """
    base = base or TrajectoryParams()
    scenario = SCENARIOS[int(rng.integers(len(SCENARIOS)))]
    shape = SHAPES[int(rng.integers(len(SHAPES)))]
    drawn = {}
    for name in ("A_x", "omega_x", "l_x", "A_y", "omega_y", "l_y", "A_z", "omega_z", "c_phi"):
        lo, hi = getattr(ranges, name)
        drawn[name] = float(rng.uniform(lo, hi))
    if shape == "ellipse":
        drawn["l_x"], drawn["l_y"] = base.l_x, base.l_y
    return base.with_(scenario=scenario, shape=shape, x0=ranges.x0, t_star=ranges.t_star, **drawn)


def summarize(values) -> dict:
    """Median and interquartile range; both ``None`` when nothing is finite."""
    v = np.asarray([x for x in values if x is not None and np.isfinite(x)], dtype=float)
    if v.size == 0:
        return {"median": None, "iqr": None}
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    return {"median": float(med), "iqr": float(q3 - q1)}


@dataclass
class RunResult:
    method: str
    run_index: int
    trajectory: TrajectoryParams
    metrics: MetricsReport | None
    failed: bool = False
    message: str = ""
    record: EpisodeRecord | None = None


@dataclass
class CampaignResult:
    methods: tuple
    n_runs: int
    seed: int
    duration: float
    ranges: ParameterRanges
    runs: list = field(default_factory=list)

    def for_method(self, method: str) -> list[RunResult]:
        return sorted((r for r in self.runs if r.method == method), key=lambda r: r.run_index)

    def metric(self, method: str, name: str) -> np.ndarray:
        return np.array([getattr(r.metrics, name) for r in self.for_method(method) if not r.failed])

    def digest(self) -> str:
        return config_digest(self.methods, self.n_runs, self.seed, self.duration, self.ranges)

    def summary(self) -> dict:
        out = {"seed": self.seed, "runs": self.n_runs, "duration": self.duration,
               "config_digest": self.digest(), "methods": {}}
        for m in self.methods:
            runs = self.for_method(m)
            ok = [r for r in runs if not r.failed]
            out["methods"][m] = {
                "runs": len(runs),
                "failures": len(runs) - len(ok),
                "failure_messages": [f"run {r.run_index}: {r.message}" for r in runs if r.failed],
                "metrics": {k: summarize([getattr(r.metrics, k) for r in ok]) for k in METRIC_NAMES},
            }
        return out


def config_digest(methods, n_runs, seed, duration, ranges: ParameterRanges) -> str:
    payload = json.dumps({"methods": list(methods), "runs": int(n_runs), "seed": int(seed),
                          "duration": float(duration), "ranges": asdict(ranges)}, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def run_montecarlo(n_runs: int = DESK_RUNS, methods=METHODS, seed: int = 0,
                   duration: float = DESK_DURATION, ranges: ParameterRanges = ParameterRanges(),
                   keep_records: bool = False, on_run=None, **episode_kw) -> CampaignResult:
    """Run ``n_runs`` trajectories for every method.

    Run ``i`` uses the same trajectory for every method; its sensor noise comes
    from the ``(seed, i)`` stream.  Failed episodes are counted, logged and
    excluded from the aggregates.  ``on_run`` is called with each
    :class:`RunResult` as it finishes.
    """
    if n_runs < 0:
        raise ValueError("n_runs must be non-negative")
    methods = tuple(methods)
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown allocation method {m!r}")
    episode_kw.setdefault("record_timing", True)
    result = CampaignResult(methods, n_runs, seed, duration, ranges)
    for i in range(n_runs):
        traj = sample_trajectory(sampling_rng(seed, i), ranges)
        for m in methods:
            rec = run_episode(EpisodeConfig(trajectory=traj, method=m, duration=duration,
                                            seed=seed, run_index=i, **episode_kw))
            metrics = compute_metrics(rec) if len(rec) else None
            failed = rec.failed or metrics is None
            if failed:
                log.warning("run %d (%s) failed: %s", i, m, rec.message)
            run = RunResult(m, i, traj, metrics, failed, rec.message,
                            rec if keep_records else None)
            result.runs.append(run)
            if on_run is not None:
                on_run(run, rec)
    return result
