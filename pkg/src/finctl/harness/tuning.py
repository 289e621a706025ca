"""Genetic-algorithm tuning of the feedback gains ``K_p``, ``k`` and ``K_d``."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..controller import ControllerGains
from ..guidance import TrajectoryParams
from .episode import EpisodeConfig, EpisodeRecord, run_episode
from .metrics import tracking_errors

N_GENES = 10  # K_p (3), k, K_d (6)
Q_GA = np.array([100.0, 100.0, 100.0, 50.0, 50.0, 50.0])
R_GA = np.full(6, 0.5)


@dataclass(frozen=True)
class GaParams:
    population: int = 20
    iterations: int = 50
    mutation_prob: float = 0.45
    elite_ratio: float = 0.01
    crossover_prob: float = 0.5
    parents_portion: float = 0.25
    crossover: str = "uniform"
    bounds: tuple = (0.1, 50.0)

    def __post_init__(self):
        if self.population < 2 or self.iterations < 0:
            raise ValueError("population must be at least 2 and iterations non-negative")
        for name in ("mutation_prob", "elite_ratio", "crossover_prob", "parents_portion"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.crossover not in ("uniform", "one_point", "two_point"):
            raise ValueError("crossover must be uniform, one_point or two_point")
        if not 0 < self.bounds[0] < self.bounds[1]:
            raise ValueError("bounds must satisfy 0 < low < high")

    @property
    def n_elite(self) -> int:
        n = int(self.population * self.elite_ratio)
        return max(n, 1) if self.elite_ratio > 0 else 0

    @property
    def n_parents(self) -> int:
        return max(int(self.population * self.parents_portion), self.n_elite, 2)


def genome_to_gains(genome, method: str = "prop") -> ControllerGains:
    g = np.asarray(genome, dtype=float)
    return ControllerGains.for_method(method, K_p=g[:3], k=g[3], K_d=g[4:10])


def gains_to_genome(gains: ControllerGains) -> np.ndarray:
    return np.concatenate([gains.K_p, [gains.k], gains.K_d])


def tracking_cost(records, Q=Q_GA, R=R_GA) -> float:
    """``sqrt(mean(e^T Q e + tau^T R tau))`` over all samples of all records.

    ``e`` stacks the position error and the wrapped Euler-angle error; ``tau``
    is the commanded wrench.  A failed record costs ``inf``.
    """
    total, n = 0.0, 0
    for rec in records:
        if rec.failed or len(rec) == 0:
            return float("inf")
        lin, ang = tracking_errors(rec.eta_d, rec.eta_hat)
        e = np.hstack([lin, ang])
        total += float(np.sum(e * e * Q) + np.sum(rec.tau_des ** 2 * R))
        n += len(rec)
    return float(np.sqrt(total / n)) if n else float("inf")


def reference_trajectories() -> list[TrajectoryParams]:
    """Ellipse then Lissajous, each at the middle of the sampling ranges."""
    mid = TrajectoryParams(A_x=1.5, A_y=1.5, A_z=0.3, omega_x=0.03, omega_y=0.03,
                           omega_z=0.03, l_x=1.25, l_y=1.25, c_phi=0.1)
    return [mid.with_(shape="ellipse"), mid.with_(shape="lissajous")]


def episode_cost(genome, method: str = "prop", duration: float = 100.0, seed: int = 0,
                 trajectories=None, **episode_kw) -> float:
    """Cost of one genome over the chained reference episodes."""
    gains = genome_to_gains(genome, method)
    records: list[EpisodeRecord] = []
    for i, traj in enumerate(trajectories or reference_trajectories()):
        records.append(run_episode(EpisodeConfig(trajectory=traj, method=method, gains=gains,
                                                 duration=duration, seed=seed, run_index=i,
                                                 **episode_kw)))
    return tracking_cost(records)


@dataclass
class GaResult:
    best_genome: np.ndarray
    best_cost: float
    history: list = field(default_factory=list)

    @property
    def gains(self) -> tuple[np.ndarray, np.ndarray]:
        """``(K_p with k appended, K_d)`` in the preset layout."""
        return self.best_genome[:4].copy(), self.best_genome[4:].copy()


def _crossover(a, b, kind: str, rng: np.random.Generator):
    if kind == "uniform":
        swap = rng.random(a.size) < 0.5
    else:
        cuts = np.sort(rng.integers(0, a.size, size=1 if kind == "one_point" else 2))
        idx = np.arange(a.size)
        swap = idx < cuts[0] if kind == "one_point" else (idx >= cuts[0]) & (idx < cuts[1])
    return np.where(swap, b, a), np.where(swap, a, b)


def ga_minimize(cost, n_genes: int = N_GENES, params: GaParams = GaParams(), seed: int = 0,
                initial=None, on_generation=None) -> GaResult:
    """Real-coded genetic algorithm with elitism.

    Each generation keeps the elite, fills the parent pool by fitness-weighted
    draws, and breeds the rest through crossover and per-gene uniform
    mutation inside the bounds.  The best-so-far cost never increases.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    lo, hi = params.bounds
    pop = rng.uniform(lo, hi, size=(params.population, n_genes))
    if initial is not None:
        init = np.clip(np.atleast_2d(np.asarray(initial, dtype=float)), lo, hi)
        pop[:len(init)] = init[:params.population]
    scores = np.array([cost(g) for g in pop])
    best_i = int(np.argmin(scores))
    result = GaResult(pop[best_i].copy(), float(scores[best_i]), [float(scores[best_i])])
    for gen in range(params.iterations):
        order = np.argsort(scores, kind="stable")
        pop, scores = pop[order], scores[order]
        n_par = params.n_parents
        parents = [pop[i].copy() for i in range(params.n_elite)]
        parent_scores = [scores[i] for i in range(params.n_elite)]
        finite = np.where(np.isfinite(scores), scores, np.nan)
        worst = np.nanmax(finite) if np.isfinite(finite).any() else 1.0
        weight = np.nan_to_num(worst - finite, nan=0.0) + 1e-12
        while len(parents) < n_par:
            i = int(rng.choice(len(pop), p=weight / weight.sum()))
            parents.append(pop[i].copy())
            parent_scores.append(scores[i])
        children, child_scores = list(parents), list(parent_scores)
        while len(children) < params.population:
            a, b = (parents[i] for i in rng.choice(n_par, size=2, replace=False))
            if rng.random() < params.crossover_prob:
                a, b = _crossover(a, b, params.crossover, rng)
            for child in (a.copy(), b.copy()):
                mutate = rng.random(n_genes) < params.mutation_prob
                child[mutate] = rng.uniform(lo, hi, size=int(mutate.sum()))
                if len(children) < params.population:
                    children.append(child)
                    child_scores.append(None)
        pop = np.array(children)
        scores = np.array([s if s is not None else cost(g) for g, s in zip(pop, child_scores)],
                          dtype=float)
        best_i = int(np.argmin(scores))
        if scores[best_i] < result.best_cost:
            result.best_genome, result.best_cost = pop[best_i].copy(), float(scores[best_i])
        result.history.append(result.best_cost)
        if on_generation is not None:
            on_generation(gen, result)
    return result


def ga_tune(method: str = "prop", params: GaParams = GaParams(), seed: int = 0,
            duration: float = 100.0, warm_start: bool = False, on_generation=None,
            **episode_kw) -> GaResult:
    """Tune the gains for ``method`` on the chained reference episodes.

    The initial population is uniform in the bounds; ``warm_start`` replaces
    its first member by the method's preset gains.
    """
    def cost(genome):
        return episode_cost(genome, method, duration, seed, **episode_kw)
    start = gains_to_genome(ControllerGains.for_method(method)) if warm_start else None
    return ga_minimize(cost, N_GENES, params, seed, initial=start, on_generation=on_generation)
