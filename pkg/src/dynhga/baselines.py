"""Comparison algorithms: generational GAs with memory, random immigrants,
hypermutation, and a GA with a hill-climbing elite.

All four work directly in x-space on the box, with simulated binary crossover
and polynomial mutation. Every evaluation, including re-evaluation after a
change and memory probes, goes through the environment's ledger.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import BudgetExhausted, InvalidInputError
from .local_search import LsConfig, bfgs_minimize
from .metrics import RunTrace
from .objective_env import BoxDomain, DynamicEnvironment


@dataclass(frozen=True)
class BaselineConfig:
    pop_size: int = 100
    crossover_rate: float = 0.6
    mutation_rate: float = 0.2
    sbx_eta: float = 0.7
    tournament_size: int = 2
    elitism_count: int = 1
    memory_capacity: int = 10
    immigrants_count: int = 25
    hyper_rate: float = 0.5
    hyper_duration: int = 5
    hillclimb_budget: Optional[int] = None  # None -> 2n + 10
    max_generations: int = 1_000_000
    seed: int = 0

    def __post_init__(self):
        for name in ("crossover_rate", "mutation_rate", "hyper_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InvalidInputError(f"{name} must lie in [0, 1], got {v}")
        if self.pop_size < 2:
            raise InvalidInputError("pop_size must be >= 2")
        if self.sbx_eta <= 0:
            raise InvalidInputError("sbx_eta must be positive")
        if self.tournament_size < 1 or self.memory_capacity < 1:
            raise InvalidInputError("tournament_size and memory_capacity must be >= 1")
        if not 0 <= self.elitism_count <= self.pop_size:
            raise InvalidInputError("elitism_count must lie in [0, pop_size]")
        if not 0 <= self.immigrants_count <= self.pop_size:
            raise InvalidInputError("immigrants_count must lie in [0, pop_size]")
        if self.hyper_duration < 0:
            raise InvalidInputError("hyper_duration must be >= 0")
        if self.hillclimb_budget is not None and self.hillclimb_budget < 1:
            raise InvalidInputError("hillclimb_budget must be >= 1")

    def hillclimb_evals(self, dimension: int) -> int:
        return self.hillclimb_budget if self.hillclimb_budget is not None else 2 * dimension + 10


# ---------------------------------------------------------------- operators

def sbx_spread(u, eta: float):
    """Spread factor beta for uniform draws ``u``."""
    u = np.asarray(u, dtype=float)
    e = 1.0 / (eta + 1.0)
    lo = np.power(2.0 * np.minimum(u, 0.5), e)
    with np.errstate(divide="ignore"):
        hi = np.power(1.0 / (2.0 * (1.0 - np.maximum(u, 0.5))), e)
    return np.where(u <= 0.5, lo, hi)


def sbx_crossover(p1, p2, eta: float, rng, bounds: BoxDomain, u=None):
    """Simulated binary crossover, one spread draw per coordinate, clamped to ``bounds``.

    ``u`` may be supplied to fix the uniform draws.
    """
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    if p1.shape != p2.shape:
        raise InvalidInputError("parents differ in length")
    if eta <= 0:
        raise InvalidInputError("eta must be positive")
    if u is None:
        u = rng.uniform(0.0, 1.0, size=p1.shape)
    beta = sbx_spread(u, eta)
    with np.errstate(invalid="ignore"):
        c1 = 0.5 * ((1.0 + beta) * p1 + (1.0 - beta) * p2)
        c2 = 0.5 * ((1.0 - beta) * p1 + (1.0 + beta) * p2)
    # p1 == p2 with beta = inf gives inf * 0
    same = p1 == p2
    c1 = np.where(same, p1, c1)
    c2 = np.where(same, p2, c2)
    return bounds.clip(c1), bounds.clip(c2)


def polynomial_mutation(p, eta: float, rate: float, rng, bounds: BoxDomain, mask=None):
    """Bounded polynomial mutation; each coordinate mutates with probability ``rate``.

    ``mask`` overrides the per-coordinate coin flips when given.
    """
    if not 0.0 <= rate <= 1.0:
        raise InvalidInputError("rate must lie in [0, 1]")
    x = np.array(p, dtype=float)
    lo, hi = bounds.lower, bounds.upper
    if mask is None:
        mask = rng.uniform(0.0, 1.0, size=x.shape) < rate
    u = rng.uniform(0.0, 1.0, size=x.shape)
    span = hi - lo
    d1 = (x - lo) / span
    d2 = (hi - x) / span
    e = eta + 1.0
    low = np.power(2.0 * u + (1.0 - 2.0 * u) * np.power(1.0 - d1, e), 1.0 / e) - 1.0
    high = 1.0 - np.power(2.0 * (1.0 - u) + 2.0 * (u - 0.5) * np.power(1.0 - d2, e), 1.0 / e)
    dq = np.where(u < 0.5, low, high)
    x = np.where(mask, x + dq * span, x)
    return bounds.clip(x)


def tournament_select(fitness, rng, size: int = 2) -> int:
    idx = rng.integers(0, len(fitness), size=size)
    return int(idx[np.argmin(np.asarray(fitness)[idx])])


# ------------------------------------------------------------------- memory

@dataclass
class MemoryModule:
    capacity: int = 10

    def __post_init__(self):
        if self.capacity < 1:
            raise InvalidInputError("capacity must be >= 1")
        self.entries = []

    def __len__(self):
        return len(self.entries)


def memory_store(mem: MemoryModule, pop) -> None:
    """Snapshot the best member of ``pop`` (a ``Population``); oldest entry goes first."""
    i = int(np.argmin(pop.fitness))
    mem.entries.append((pop.x[i].copy(), float(pop.fitness[i])))
    while len(mem.entries) > mem.capacity:
        mem.entries.pop(0)


def memory_retrieve(mem: MemoryModule, pop, env: DynamicEnvironment) -> int:
    """Re-evaluate stored points and let them replace the worst members they beat.

    Returns the number of replacements.
    """
    if not mem.entries:
        return 0
    pts = np.array([p for p, _ in mem.entries])
    vals = env.evaluate_many(pts)
    replaced = 0
    for k in np.argsort(vals, kind="stable"):
        w = int(np.argmax(pop.fitness))
        if vals[k] < pop.fitness[w]:
            pop.x[w] = pts[k]
            pop.fitness[w] = vals[k]
            replaced += 1
        else:
            break
    return replaced


# --------------------------------------------------------------- population

class Population:
    """Points in x-space with their fitness under the current epoch."""

    def __init__(self, x, fitness):
        self.x = np.asarray(x, dtype=float)
        self.fitness = np.asarray(fitness, dtype=float)

    def __len__(self):
        return self.x.shape[0]

    def best(self) -> int:
        return int(np.argmin(self.fitness))

    def reevaluate(self, env: DynamicEnvironment) -> None:
        self.fitness = env.evaluate_many(self.x)


def make_offspring(pop: Population, cfg: BaselineConfig, rng, domain: BoxDomain,
                   mutation_rate: float) -> np.ndarray:
    """Tournament pairs, SBX at ``crossover_rate``, then polynomial mutation.

    Draws are made for the whole brood at once; pairs that skip crossover pass
    their parents through unchanged.
    """
    pairs = (cfg.pop_size + 1) // 2
    k = cfg.tournament_size
    picks = rng.integers(0, len(pop), size=(2 * pairs, k))
    winners = picks[np.arange(2 * pairs), np.argmin(pop.fitness[picks], axis=1)]
    a = pop.x[winners[0::2]]
    b = pop.x[winners[1::2]]
    cross = rng.uniform(size=pairs) < cfg.crossover_rate
    if cross.any():
        c1, c2 = sbx_crossover(a[cross], b[cross], cfg.sbx_eta, rng, domain)
        a[cross] = c1
        b[cross] = c2
    children = np.empty((2 * pairs, pop.x.shape[1]))
    children[0::2] = a
    children[1::2] = b
    children = children[:cfg.pop_size]
    return polynomial_mutation(children, cfg.sbx_eta, mutation_rate, rng, domain)


def next_generation(pop: Population, env: DynamicEnvironment, cfg: BaselineConfig, rng,
                    domain: BoxDomain, mutation_rate: float) -> Population:
    children = make_offspring(pop, cfg, rng, domain, mutation_rate)
    fit = env.evaluate_many(children)
    new = Population(children, fit)
    if cfg.elitism_count:
        order = np.argsort(pop.fitness, kind="stable")[:cfg.elitism_count]
        worst = np.argsort(-new.fitness, kind="stable")[:cfg.elitism_count]
        for w, e in zip(worst, order):
            new.x[w] = pop.x[e]
            new.fitness[w] = pop.fitness[e]
    return new


def hill_climb(pop: Population, env: DynamicEnvironment, domain: BoxDomain, budget: int) -> int:
    """Short bounded BFGS from the best member; returns evaluations spent."""
    i = pop.best()
    cap = env.allowance(budget)
    ls = LsConfig(eval_budget=cap)
    r = bfgs_minimize(env.evaluate, env.gradient, pop.x[i], ls, bounds=(domain.lower, domain.upper))
    if r.f_opt < pop.fitness[i]:
        pop.x[i] = r.x_opt
        pop.fitness[i] = r.f_opt
    return r.evals_used


# ------------------------------------------------------------------ drivers

class GenerationalGA:
    """Shared loop; the variant flags pick the change reaction."""

    def __init__(self, cfg: BaselineConfig, *, memory: bool, immigrants: bool = False,
                 hypermutation: bool = False, hillclimb: bool = False):
        self.cfg = cfg
        self.use_memory = memory
        self.immigrants = immigrants
        self.hypermutation = hypermutation
        self.hillclimb = hillclimb
        self.memory = MemoryModule(cfg.memory_capacity) if memory else None
        self.hyper_left = 0
        self.generations = 0
        self.changes = 0

    def mutation_rate(self) -> float:
        return self.cfg.hyper_rate if self.hyper_left > 0 else self.cfg.mutation_rate

    def react(self, pop: Population, env, domain, rng) -> Population:
        self.changes += 1
        if self.memory is not None:
            # the population still carries the pre-change fitness here
            memory_store(self.memory, pop)
        pop.reevaluate(env)
        if self.immigrants and self.cfg.immigrants_count:
            worst = np.argsort(-pop.fitness, kind="stable")[:self.cfg.immigrants_count]
            fresh = domain.uniform(rng, size=len(worst))
            pop.x[worst] = fresh
            pop.fitness[worst] = env.evaluate_many(fresh)
        if self.hypermutation:
            self.hyper_left = self.cfg.hyper_duration
        if self.memory is not None:
            memory_retrieve(self.memory, pop, env)
        return pop

    def run(self, env: DynamicEnvironment, domain: BoxDomain) -> RunTrace:
        if env.trace is None:
            env.trace = RunTrace()
        if domain.dimension != env.dimension:
            raise InvalidInputError("domain and environment dimensions differ")
        cfg = self.cfg
        rng = np.random.default_rng(cfg.seed)
        try:
            x0 = domain.uniform(rng, size=cfg.pop_size)
            pop = Population(x0, env.evaluate_many(x0))
            while self.generations < cfg.max_generations:
                if env.observe_change():
                    pop = self.react(pop, env, domain, rng)
                rate = self.mutation_rate()
                pop = next_generation(pop, env, cfg, rng, domain, rate)
                self.generations += 1
                if self.hyper_left > 0:
                    self.hyper_left -= 1
                if env.observe_change():
                    pop = self.react(pop, env, domain, rng)
                if self.hillclimb:
                    hill_climb(pop, env, domain, cfg.hillclimb_evals(domain.dimension))
        except BudgetExhausted:
            pass
        return env.trace


def run_sga_m(env, domain, cfg: BaselineConfig) -> RunTrace:
    return GenerationalGA(cfg, memory=True).run(env, domain)


def run_ri_m(env, domain, cfg: BaselineConfig) -> RunTrace:
    return GenerationalGA(cfg, memory=True, immigrants=True).run(env, domain)


def run_hm_m(env, domain, cfg: BaselineConfig) -> RunTrace:
    return GenerationalGA(cfg, memory=True, hypermutation=True).run(env, domain)


def run_ers(env, domain, cfg: BaselineConfig) -> RunTrace:
    return GenerationalGA(cfg, memory=False, hillclimb=True).run(env, domain)
