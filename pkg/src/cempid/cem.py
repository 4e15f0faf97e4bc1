"""Cross-entropy method over a flat weight vector.

Each iteration samples N candidates from an independent-coordinate
Gaussian, scores them, refits mean and variance to the floor(N * rho)
lowest-cost candidates and adds exploration noise to the variance.  No
gradients anywhere.

The search distribution uses a diagonal covariance: a full covariance
refit from a handful of elites is rank-deficient and adds nothing here.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .errors import EmptyEliteError

logger = logging.getLogger(__name__)

# objective(weights, epoch_index, candidate_index) -> cost.  The index
# arguments let callers derive independent RNG streams per evaluation so
# results do not depend on scheduling.
Objective = Callable[[np.ndarray, int, int], float]


@dataclass
class CemConfig:
    population_N: int
    elite_fraction_rho: float
    noise_var: float
    init_mean: np.ndarray
    init_var: float

    def __post_init__(self):
        self.init_mean = np.asarray(self.init_mean, dtype=float)
        if self.population_N < 1:
            raise ValueError("population size must be >= 1")
        if not 0.0 < self.elite_fraction_rho <= 1.0:
            raise ValueError("elite fraction must be in (0, 1]")
        if self.noise_var < 0.0:
            raise ValueError("noise variance must be >= 0")
        if self.init_var <= 0.0:
            raise ValueError("initial variance must be > 0")
        if self.elite_count < 1:
            raise EmptyEliteError(
                f"floor({self.population_N} * {self.elite_fraction_rho}) = 0")

    @property
    def elite_count(self) -> int:
        return math.floor(self.population_N * self.elite_fraction_rho)


@dataclass
class CemState:
    mean: np.ndarray
    variance: np.ndarray
    iteration: int = 0
    history: list[tuple[int, float, float]] = field(default_factory=list)

    @classmethod
    def initial(cls, config: CemConfig) -> "CemState":
        dim = config.init_mean.shape[0]
        return cls(mean=config.init_mean.copy(),
                   variance=np.full(dim, config.init_var))


def sample_population(state: CemState, N: int,
                      rng: np.random.Generator) -> list[np.ndarray]:
    """N independent draws from the current search distribution."""
    std = np.sqrt(state.variance)
    return [state.mean + std * rng.standard_normal(state.mean.shape[0])
            for _ in range(N)]


BLOWUP_COST = 1e9  # stands in for "worst finite" when nothing was finite


def _sanitize_costs(costs: Sequence[float]) -> np.ndarray:
    """Replace non-finite costs by (worst finite + 1) so selection stays
    well-defined when episodes blow up."""
    arr = np.asarray(costs, dtype=float)
    finite = np.isfinite(arr)
    if not np.all(finite):
        worst = float(arr[finite].max()) if np.any(finite) else BLOWUP_COST
        n_bad = int((~finite).sum())
        logger.debug("replacing %d non-finite costs with %.6g", n_bad, worst + 1.0)
        arr = arr.copy()
        arr[~finite] = worst + 1.0
    return arr


def cem_update(state: CemState, scored: Sequence[tuple[np.ndarray, float]],
               config: CemConfig) -> CemState:
    """Refit the distribution to the elite fraction of a scored population."""
    n_elite = config.elite_count
    if n_elite < 1:
        raise EmptyEliteError("elite count is zero")
    costs = _sanitize_costs([c for _, c in scored])
    order = np.argsort(costs, kind="stable")  # ties: lower index first
    elite = np.stack([scored[i][0] for i in order[:n_elite]])
    new_mean = elite.mean(axis=0)
    new_var = elite.var(axis=0) + config.noise_var
    prev_best = state.history[-1][1] if state.history else math.inf
    best = min(prev_best, float(costs[order[0]]))  # running best, non-increasing
    history = state.history + [(state.iteration + 1, best, float(costs.mean()))]
    return replace(state, mean=new_mean, variance=new_var,
                   iteration=state.iteration + 1, history=history)


def minimize(objective: Objective, config: CemConfig, epochs: int,
             rng: np.random.Generator, *, workers: int = 1,
             on_epoch: Callable[[int, np.ndarray, "CemState", np.ndarray], None] | None = None,
             ) -> tuple[np.ndarray, CemState]:
    """Run the sample/score/refit loop and return the best-ever candidate.

    Candidate evaluations within an epoch may run concurrently (workers >
    1); the objective receives (weights, epoch, candidate) so it can
    derive a private RNG stream, which keeps results independent of
    scheduling.  History records the best-ever cost, so it is
    non-increasing.
    """
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    state = CemState.initial(config)
    best_cost = math.inf
    best_weights = config.init_mean.copy()
    for epoch in range(1, epochs + 1):
        population = sample_population(state, config.population_N, rng)
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                costs = list(pool.map(
                    lambda pair: objective(pair[1], epoch, pair[0]),
                    enumerate(population)))
        else:
            costs = [objective(w, epoch, i) for i, w in enumerate(population)]
        sane = _sanitize_costs(costs)
        state = cem_update(state, list(zip(population, sane)), config)
        epoch_best = int(np.argmin(sane))
        if sane[epoch_best] < best_cost:
            best_cost = float(sane[epoch_best])
            best_weights = population[epoch_best].copy()
        if on_epoch is not None:
            on_epoch(epoch, sane, state, best_weights)
    return best_weights, state
