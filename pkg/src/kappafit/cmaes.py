"""(mu, lambda) evolution strategy with covariance and step-size adaptation.

The strategy keeps a multivariate normal search distribution N(m, sigma^2 C)
and adapts its parameters from cumulated search paths. On top of the basic
loop it supports an adaptive offspring count, a bounded elite archive that is
reinjected into the population at prime-numbered generations, and a stagnation
restart that re-centres the search while keeping the archive.

The engine is objective-agnostic: it minimizes any callable mapping a real
coordinate vector to a float. Objectives returning non-finite values are
scored with the configured penalty sentinel.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

from .errors import ConfigError

logger = logging.getLogger(__name__)

Objective = Callable[[np.ndarray], float]


@dataclass
class StrategyConfig:
    """Static parameters of one strategy run.

    Toggles are encoded through the numeric fields: ``lambda_min ==
    lambda_max`` fixes the offspring count, ``elite_capacity == 0`` disables
    the archive, and a negative ``stagnation_tol`` disables restarts.
    """

    n: int
    mu: int = 2
    lambda_min: int = 12
    lambda_max: int = 20
    sigma_init: float = 1.2
    sigma_min: float = 1e-8
    max_gens: int = 300
    penalty: float = 1e5
    elite_capacity: int = 16
    elite_reinject_count: int = 5
    rng_seed: int = 0
    stagnation_tol: float = 1e-12

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError(f"dimension must be >= 1, got {self.n}")
        if not (1 <= self.mu <= self.lambda_min <= self.lambda_max):
            raise ConfigError(
                f"need 1 <= mu <= lambda_min <= lambda_max, got "
                f"mu={self.mu}, lambda_min={self.lambda_min}, "
                f"lambda_max={self.lambda_max}"
            )
        if not (self.sigma_init > self.sigma_min > 0):
            raise ConfigError(
                f"need sigma_init > sigma_min > 0, got "
                f"sigma_init={self.sigma_init}, sigma_min={self.sigma_min}"
            )
        if self.max_gens < 0:
            raise ConfigError("max_gens must be >= 0")
        if self.elite_capacity < 0 or self.elite_reinject_count < 0:
            raise ConfigError("elite capacity/reinject count must be >= 0")


@dataclass
class Individual:
    """One population member: objective value plus the vectors that made it."""

    fitness: float
    y: np.ndarray  # search point, y = y_parent + w
    w: np.ndarray  # mutation vector, w = sigma * sqrtC @ z
    z: np.ndarray  # standard normal draw


def _same_individual(a: Individual, b: Individual) -> bool:
    return (
        a.fitness == b.fitness
        and np.array_equal(a.y, b.y)
        and np.array_equal(a.w, b.w)
        and np.array_equal(a.z, b.z)
    )


class EliteArchive:
    """Capacity-bounded store of the best valid individuals seen so far.

    Entries stay sorted ascending by fitness; the worst entry is evicted on
    overflow. Individuals whose fitness reaches the penalty sentinel are
    never archived.
    """

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.entries: list[Individual] = []

    def __len__(self) -> int:
        return len(self.entries)

    def merge(self, ind: Individual, penalty: float) -> bool:
        """Insert ``ind`` if valid and not already present. True if stored."""
        if self.capacity == 0 or ind.fitness >= penalty:
            return False
        if any(_same_individual(ind, e) for e in self.entries):
            return False
        pos = 0
        while pos < len(self.entries) and self.entries[pos].fitness <= ind.fitness:
            pos += 1
        self.entries.insert(pos, ind)
        if len(self.entries) > self.capacity:
            self.entries.pop()
        return True

    def best(self, k: int) -> list[Individual]:
        return self.entries[: max(0, k)]


@dataclass
class StrategyState:
    """Full adaptive state of a run (distribution mean, C, paths, archive)."""

    config: StrategyConfig
    rng: np.random.Generator
    y_init: np.ndarray
    y_parent: np.ndarray
    sigma: float
    C: np.ndarray
    sqrtC: np.ndarray
    s: np.ndarray
    s_sigma: np.ndarray
    tau: float
    tau_c: float
    tau_sigma: float
    elite: EliteArchive
    generation: int = 0
    lam: int = 0
    best: Optional[Individual] = None
    prev_mean_fitness: float = math.inf


@dataclass(frozen=True)
class GenerationRecord:
    """Per-generation log entry; enough to replay fitness/sigma/lambda curves."""

    generation: int
    best: float  # best fitness in this generation's selection population
    mean: float  # arithmetic mean fitness of the sampled offspring
    best_so_far: float
    sigma: float
    lam: int
    evaluations: int  # cumulative objective evaluations
    injected: int  # elites injected this generation (prime generations only)
    archived: bool  # generation best entered the elite archive
    restarted: bool


@dataclass
class EvolveResult:
    best: Individual
    history: list[GenerationRecord]
    state: StrategyState


def init_state(config: StrategyConfig, y_init: Optional[np.ndarray] = None) -> StrategyState:
    """Fresh strategy state: C = I, zero paths, sigma = sigma_init.

    With ``y_init=None`` the start point is drawn uniformly from
    (0.1, 0.9)^n using the seeded generator, keeping the run reproducible.
    """
    n = config.n
    rng = np.random.default_rng(config.rng_seed)
    if y_init is None:
        y0 = rng.uniform(0.1, 0.9, n)
    else:
        y0 = np.asarray(y_init, dtype=float)
        if y0.shape != (n,):
            raise ConfigError(
                f"y_init has shape {y0.shape}, expected ({n},)"
            )
        if not np.all(np.isfinite(y0)):
            raise ConfigError("y_init must be finite")
        y0 = y0.copy()
    return StrategyState(
        config=config,
        rng=rng,
        y_init=y0.copy(),
        y_parent=y0,
        sigma=config.sigma_init,
        C=np.eye(n),
        sqrtC=np.eye(n),
        s=np.zeros(n),
        s_sigma=np.zeros(n),
        tau=math.sqrt(n),
        tau_c=float(n * n),
        tau_sigma=math.sqrt(n),
        elite=EliteArchive(config.elite_capacity),
    )


def refresh_transform(state: StrategyState) -> StrategyState:
    """Refresh sqrtC from C via Cholesky (sqrtC @ sqrtC.T == C).

    If C has drifted off the positive-definite cone the factorization fails
    and the previous transform is kept (logged), degrading to a stale but
    usable sampling matrix.
    """
    try:
        state.sqrtC = np.linalg.cholesky(state.C)
    except np.linalg.LinAlgError:
        logger.warning(
            "generation %d: covariance not positive definite, "
            "keeping previous transform",
            state.generation,
        )
    return state


def _sanitized(fitness: float, penalty: float) -> float:
    if not math.isfinite(fitness):
        logger.warning("objective returned non-finite value, using penalty")
        return penalty
    return float(fitness)


def sample_offspring(
    state: StrategyState,
    objective: Objective,
    lam: int,
    map_fn: Callable[..., Iterable] = map,
) -> list[Individual]:
    """Draw and evaluate ``lam`` offspring: z ~ N(0,I), w = sigma*sqrtC@z.

    ``map_fn`` may be a parallel map; evaluation order does not affect the
    result. Non-finite objective values are replaced by the penalty sentinel.
    """
    if lam < 1:
        raise ConfigError(f"lambda must be >= 1, got {lam}")
    n = state.config.n
    Z = state.rng.standard_normal((lam, n))
    W = state.sigma * (Z @ state.sqrtC.T)
    Y = state.y_parent + W
    ys = [Y[i] for i in range(lam)]
    fits = list(map_fn(objective, ys))
    penalty = state.config.penalty
    return [
        Individual(_sanitized(fits[i], penalty), ys[i], W[i], Z[i])
        for i in range(lam)
    ]


def select_and_recombine(
    pop: list[Individual], mu: int
) -> tuple[list[Individual], Individual]:
    """Pick the mu lowest-fitness individuals and build their centroid.

    Ties break by position in ``pop`` (stable sort), which is the sampling
    order, so seeded runs reproduce exactly. The recombinant's y, w, z are
    unweighted means of the parents'; its fitness is left unevaluated (nan).
    """
    if not pop:
        raise ConfigError("cannot select from an empty population")
    if mu > len(pop):
        raise ConfigError(f"mu={mu} exceeds population size {len(pop)}")
    parents = sorted(pop, key=lambda ind: ind.fitness)[:mu]
    recombinant = Individual(
        fitness=math.nan,
        y=np.mean([p.y for p in parents], axis=0),
        w=np.mean([p.w for p in parents], axis=0),
        z=np.mean([p.z for p in parents], axis=0),
    )
    return parents, recombinant


def update_paths_and_covariance(state: StrategyState, recombinant: Individual) -> StrategyState:
    """Cumulate the search path and fold it into C, then re-symmetrize.

    s <- (1 - 1/tau) s + sqrt(mu/tau (2 - 1/tau)) <w>/sigma
    C <- (1 - 1/tau_c) C + (1/tau_c) s s^T
    """
    cfg = state.config
    decay = 1.0 - 1.0 / state.tau
    gain = math.sqrt(cfg.mu / state.tau * (2.0 - 1.0 / state.tau))
    state.s = decay * state.s + gain * (recombinant.w / state.sigma)
    state.C = (1.0 - 1.0 / state.tau_c) * state.C + np.outer(
        state.s / state.tau_c, state.s
    )
    state.C = (state.C + state.C.T) / 2.0  # exact symmetry
    return state


def update_step_size(state: StrategyState, recombinant: Individual) -> StrategyState:
    """Cumulate the z-path and rescale sigma.

    s_sigma <- (1 - 1/tau_sigma) s_sigma + sqrt(mu/tau_sigma (2 - 1/tau_sigma)) <z>
    sigma   <- sigma * exp((|s_sigma|^2 - n) / (2 n sqrt(n)))
    """
    cfg = state.config
    decay = 1.0 - 1.0 / state.tau_sigma
    gain = math.sqrt(cfg.mu / state.tau_sigma * (2.0 - 1.0 / state.tau_sigma))
    state.s_sigma = decay * state.s_sigma + gain * recombinant.z
    n = cfg.n
    sq = float(state.s_sigma @ state.s_sigma)
    state.sigma *= math.exp((sq - n) / (2.0 * n * math.sqrt(n)))
    return state


def adapt_lambda(config: StrategyConfig, generation: int) -> int:
    """Offspring count schedule: wide early, narrowing to the floor."""
    if generation < 1:
        raise ConfigError("generation must be >= 1")
    return max(config.lambda_min, config.lambda_max - generation)


def _is_prime(k: int) -> bool:
    if k < 2:
        return False
    if k < 4:
        return True
    if k % 2 == 0:
        return False
    d = 3
    while d * d <= k:
        if k % d == 0:
            return False
        d += 2
    return True


def maybe_reinject_elite(
    state: StrategyState, pop: list[Individual]
) -> tuple[list[Individual], int]:
    """At prime-numbered generations, union the best archived elites into pop.

    Returns the (possibly extended) population and the number injected.
    Entries already present in the population are not duplicated.
    """
    if not _is_prime(state.generation):
        return pop, 0
    k = min(state.config.elite_reinject_count, len(state.elite))
    if k == 0:
        return pop, 0
    injected = [
        e for e in state.elite.best(k)
        if not any(_same_individual(e, p) for p in pop)
    ]
    return pop + injected, len(injected)


def detect_stagnation_and_restart(state: StrategyState, mean_fitness: float) -> bool:
    """Restart the search distribution when the population mean stalls.

    Fires when |mean - previous mean| <= stagnation_tol: the mean is moved
    back to a randomly scaled copy of the start point, C and sigma are reset
    and the paths are zeroed. The elite archive survives the reset. Returns
    True when the restart fired.
    """
    cfg = state.config
    fired = abs(mean_fitness - state.prev_mean_fitness) <= cfg.stagnation_tol
    if fired:
        logger.info("generation %d: stagnation restart", state.generation)
        n = cfg.n
        state.y_parent = state.y_init * state.rng.uniform(0.5, 1.0)
        state.lam = cfg.lambda_max
        state.C = np.eye(n)
        state.sqrtC = np.eye(n)
        state.sigma = cfg.sigma_init
        state.s = np.zeros(n)
        state.s_sigma = np.zeros(n)
    state.prev_mean_fitness = mean_fitness
    return fired


def evolve(
    objective: Objective,
    config: StrategyConfig,
    y_init: Optional[np.ndarray] = None,
    map_fn: Callable[..., Iterable] = map,
    on_generation: Optional[Callable[[int, int], None]] = None,
    on_record: Optional[Callable[[GenerationRecord], None]] = None,
) -> EvolveResult:
    """Run the full strategy loop until sigma collapses or the cap is hit.

    Per generation: refresh the transform, pick lambda from the schedule,
    sample and evaluate offspring, reinject elites on prime generations,
    select/recombine, update paths, covariance and step size, then check
    for stagnation. Runs with equal seeds produce bit-identical histories.
    """
    state = init_state(config, y_init)
    f0 = _sanitized(objective(state.y_parent), config.penalty)
    zero = np.zeros(config.n)
    state.best = Individual(f0, state.y_parent.copy(), zero.copy(), zero.copy())
    evaluations = 1
    history: list[GenerationRecord] = []

    while state.generation + 1 <= config.max_gens:
        state.generation += 1
        refresh_transform(state)
        lam = adapt_lambda(config, state.generation)
        state.lam = lam
        if on_generation is not None:
            on_generation(state.generation, lam)

        pop = sample_offspring(state, objective, lam, map_fn)
        evaluations += lam
        mean_fitness = sum(ind.fitness for ind in pop) / lam
        pop, injected = maybe_reinject_elite(state, pop)

        parents, recombinant = select_and_recombine(pop, config.mu)
        archived = state.elite.merge(parents[0], config.penalty)
        if parents[0].fitness < state.best.fitness:
            state.best = parents[0]

        state.y_parent = recombinant.y
        update_paths_and_covariance(state, recombinant)
        update_step_size(state, recombinant)
        restarted = detect_stagnation_and_restart(state, mean_fitness)

        record = GenerationRecord(
            generation=state.generation,
            best=parents[0].fitness,
            mean=mean_fitness,
            best_so_far=state.best.fitness,
            sigma=state.sigma,
            lam=lam,
            evaluations=evaluations,
            injected=injected,
            archived=archived,
            restarted=restarted,
        )
        history.append(record)
        if on_record is not None:
            on_record(record)

        if state.sigma < config.sigma_min:
            break

    return EvolveResult(best=state.best, history=history, state=state)
