"""Hybrid genetic algorithm with BFGS refinement, adapted to moving optima.

Genotypes live in unconstrained y-space and reach the box through the sine
transform. An individual's fitness is the objective value at the local
optimum its genotype descends to; the genotype itself is never overwritten.
Parents whose local optima coincide are treated as duplicates and produce a
child by mutation, all other pairs by arithmetic crossover. On the
generation after an environment change, mutation steps use a random scale
and a random direction to scatter the population.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import BudgetExhausted, ContractViolation, InvalidInputError
from .local_search import LsConfig
from .metrics import RunTrace
from .objective_env import BoxDomain, DynamicEnvironment

CROSSOVER = "crossover"
MUTATION = "mutation"
MUTATION_OVERRIDE = "mutation-override"
MUTATION_DEGENERATE = "mutation-degenerate"
ELITE = "elite"
CLONE = "clone"
INITIAL = "initial"


@dataclass
class Individual:
    genotype: np.ndarray
    refined: np.ndarray | None = None
    fitness: float | None = None
    epoch: int | None = None
    origin: str = INITIAL

    @property
    def is_refined(self) -> bool:
        return self.refined is not None

    def invalidate(self) -> None:
        self.refined = None
        self.fitness = None
        self.epoch = None

    def copy(self, origin=None) -> "Individual":
        return Individual(
            self.genotype.copy(),
            None if self.refined is None else self.refined.copy(),
            self.fitness,
            self.epoch,
            self.origin if origin is None else origin,
        )


@dataclass(frozen=True)
class HgaConfig:
    pop_size: int = 100
    max_generations: int = 1_000_000
    tournament_size: int = 2
    sim_fitness_tol: float = 1e-6
    sim_point_tol: float = 1e-3
    small_norm_tol: float = 1e-8
    ls_config: LsConfig | None = None
    elitism_count: int = 1
    seed: int = 0
    # change reaction: mutation scale ~ U[0, override_scale], direction ~ N(0, I)
    override_scale: float = 2.0 * math.pi
    # optional global rates; off by default so Step 4(b)'s rule alone picks the operator
    rate_gating: bool = False
    crossover_rate: float = 0.6
    mutation_rate: float = 0.2

    def __post_init__(self):
        if self.pop_size < 2:
            raise InvalidInputError("pop_size must be >= 2")
        if self.max_generations < 1 or self.tournament_size < 1:
            raise InvalidInputError("max_generations and tournament_size must be >= 1")
        if min(self.sim_fitness_tol, self.sim_point_tol, self.small_norm_tol) <= 0:
            raise InvalidInputError("similarity and norm tolerances must be positive")
        if self.elitism_count < 0 or self.elitism_count > self.pop_size:
            raise InvalidInputError("elitism_count must lie in [0, pop_size]")

    def local_search(self, dimension: int) -> LsConfig:
        return self.ls_config if self.ls_config is not None else refinement_config(dimension)


def refinement_config(dimension: int, **overrides) -> LsConfig:
    """Default refinement search in genotype space.

    Step lengths are in radians of y: a basin of the +-50 box is about 0.02
    wide near the centre, so the cap of 0.3 lets one line search cross a
    handful of basins without jumping across the box. The gradient tolerance
    of 1e-3 in y is roughly 2e-5 in x, below which line searches only chase
    rounding noise. The budget of n + 7 buys about four generations per
    5,000 evaluations for a population of 100.
    """
    base = dict(eval_budget=dimension + 7, grad_tolerance=1e-3, max_step=0.3, initial_step=0.15)
    base.update(overrides)
    return LsConfig(**base)


def initialize_population(cfg: HgaConfig, rng, dimension: int) -> list[Individual]:
    """Genotypes uniform on [-pi/2, pi/2]^n, which the sine transform maps onto the box once."""
    ys = rng.uniform(-math.pi / 2, math.pi / 2, size=(cfg.pop_size, dimension))
    return [Individual(y) for y in ys]


def refine_individual(ind: Individual, env: DynamicEnvironment, domain: BoxDomain, ls: LsConfig) -> None:
    limit = env.allowance(ls.eval_budget)
    epoch = env.clock.epoch
    r = kernels.refine_sine_rastrigin(ind.genotype, env.delta, domain, ls, max_evals=limit)
    env.charge(r.values)
    ind.refined = r.x
    ind.fitness = r.f
    ind.epoch = epoch


def refine_population(pop, env: DynamicEnvironment, domain: BoxDomain, ls: LsConfig) -> int:
    """Refine every individual without a refinement from the current epoch.

    Returns the number of local searches run. Budget exhaustion propagates;
    refinements finished before it stay recorded.
    """
    count = 0
    for ind in pop:
        if ind.refined is not None and ind.epoch == env.clock.epoch:
            continue
        refine_individual(ind, env, domain, ls)
        count += 1
    return count


def invalidate_stale(pop, epoch: int) -> int:
    n = 0
    for ind in pop:
        if ind.refined is not None and ind.epoch != epoch:
            ind.invalidate()
            n += 1
    return n


def similar(p1: Individual, p2: Individual, cfg: HgaConfig) -> bool:
    """Same fitness and same local optimum, within the configured tolerances."""
    if p1.refined is None or p2.refined is None:
        raise ContractViolation("similarity needs refined individuals")
    f1, f2 = p1.fitness, p2.fitness
    if abs(f1 - f2) > cfg.sim_fitness_tol * (1.0 + max(abs(f1), abs(f2))):
        return False
    return float(np.max(np.abs(p1.refined - p2.refined))) <= cfg.sim_point_tol


def crossover(y1, y2, rng) -> np.ndarray:
    """Random convex combination ``a*y1 + (1-a)*y2``."""
    y1 = np.asarray(y1, dtype=float)
    y2 = np.asarray(y2, dtype=float)
    if y1.shape != y2.shape:
        raise InvalidInputError("parents differ in length")
    alpha = rng.uniform(0.0, 1.0)
    child = y2 + alpha * (y1 - y2)
    return np.clip(child, np.minimum(y1, y2), np.maximum(y1, y2))


def mutate(y, y1, y2, cfg: HgaConfig, rng, override: bool = False):
    """Step from ``y`` along the parents' difference scaled by pi.

    Returns ``(child, kind)``. A near-zero difference is replaced by a random
    +-1 vector. With ``override`` the scale is uniform on
    ``[0, cfg.override_scale]`` and the direction standard normal.
    """
    y = np.asarray(y, dtype=float)
    y1 = np.asarray(y1, dtype=float)
    y2 = np.asarray(y2, dtype=float)
    if not (y.shape == y1.shape == y2.shape):
        raise InvalidInputError("mutation vectors differ in length")
    if override:
        u = rng.uniform(0.0, cfg.override_scale)
        return y + u * rng.standard_normal(y.size), MUTATION_OVERRIDE
    diff = y1 - y2
    if float(np.linalg.norm(diff)) < cfg.small_norm_tol:
        d = rng.choice(np.array([-1.0, 1.0]), size=y.size)
        return y + math.pi * d, MUTATION_DEGENERATE
    return y + math.pi * diff, MUTATION


def tournament(pop, rng, size: int) -> int:
    idx = rng.integers(0, len(pop), size=size)
    best = int(idx[0])
    for i in idx[1:]:
        if pop[i].fitness < pop[best].fitness:
            best = int(i)
    return best


def _fittest(pop, k):
    return sorted(range(len(pop)), key=lambda i: pop[i].fitness)[:k]


def hga_generation(pop, env: DynamicEnvironment, domain: BoxDomain, cfg: HgaConfig, rng,
                   override: bool = False) -> list[Individual]:
    """One round of selection, reproduction, refinement and elitism.

    Each child's ``origin`` records the operator that produced it. If the
    budget runs out while refining children, :class:`BudgetExhausted`
    propagates and the caller keeps the old population.
    """
    ls = cfg.local_search(domain.dimension)
    if any(ind.refined is None for ind in pop):
        raise ContractViolation("hga_generation needs a refined population")
    children = []
    for _ in range(cfg.pop_size):
        i = tournament(pop, rng, cfg.tournament_size)
        j = tournament(pop, rng, cfg.tournament_size)
        p1, p2 = pop[i], pop[j]
        base = p2 if p2.fitness < p1.fitness else p1
        if similar(p1, p2, cfg):
            if cfg.rate_gating and rng.uniform() >= cfg.mutation_rate:
                children.append(base.copy(CLONE))
                continue
            y, kind = mutate(base.genotype, p1.genotype, p2.genotype, cfg, rng, override)
        else:
            if cfg.rate_gating and rng.uniform() >= cfg.crossover_rate:
                children.append(base.copy(CLONE))
                continue
            y, kind = crossover(p1.genotype, p2.genotype, rng), CROSSOVER
        children.append(Individual(y, origin=kind))

    refine_population(children, env, domain, ls)

    if cfg.elitism_count:
        elites = [pop[i].copy(ELITE) for i in _fittest(pop, cfg.elitism_count)]
        worst = sorted(range(len(children)), key=lambda i: children[i].fitness, reverse=True)
        for slot, elite in zip(worst, elites):
            children[slot] = elite
    return children


def run_hga(env: DynamicEnvironment, domain: BoxDomain, cfg: HgaConfig, stats=None) -> RunTrace:
    """Run until the evaluation budget or ``max_generations`` runs out.

    ``stats``, if given, is a dict that receives generation and change counts.
    """
    if env.trace is None:
        env.trace = RunTrace()
    if domain.dimension != env.dimension:
        raise InvalidInputError("domain and environment dimensions differ")
    rng = np.random.default_rng(cfg.seed)
    ls = cfg.local_search(domain.dimension)
    pop = initialize_population(cfg, rng, domain.dimension)
    override = False
    generations = 0
    changes = 0
    try:
        refine_population(pop, env, domain, ls)
        while generations < cfg.max_generations:
            pop = hga_generation(pop, env, domain, cfg, rng, override)
            generations += 1
            override = False
            if env.observe_change():
                changes += 1
                # re-refine former leaders first so best-since-change recovers early
                pop.sort(key=lambda ind: ind.fitness)
                invalidate_stale(pop, env.clock.epoch)
                override = True
            refine_population(pop, env, domain, ls)
    except BudgetExhausted:
        pass
    if stats is not None:
        stats.update(generations=generations, changes_observed=changes, population=pop)
    return env.trace
