import math

import numpy as np
import pytest

from dynhga import hga as H
from dynhga.errors import BudgetExhausted, ContractViolation, InvalidInputError
from dynhga.metrics import RunTrace
from dynhga.objective_env import (BoxDomain, DynamicEnvironment, DynamicsSpec, shifted_eval,
                                  transform_y_to_x)


class FixedAlpha:
    def __init__(self, alpha):
        self.alpha = alpha

    def uniform(self, lo=0.0, hi=1.0):
        return lo + self.alpha * (hi - lo)


def static_env(n, budget=None):
    return DynamicEnvironment(DynamicsSpec("linear", 0.0, 10**9, n), budget=budget)


def refined_pop(n=3, size=10, seed=0, env=None):
    env = env or static_env(n)
    cfg = H.HgaConfig(pop_size=size, seed=seed)
    rng = np.random.default_rng(seed)
    pop = H.initialize_population(cfg, rng, n)
    H.refine_population(pop, env, BoxDomain.symmetric(n), cfg.local_search(n))
    return pop, env, cfg, rng


class TestInitialization:
    def test_size_and_state(self):
        cfg = H.HgaConfig()
        pop = H.initialize_population(cfg, np.random.default_rng(0), 5)
        assert len(pop) == 100
        assert not any(ind.is_refined for ind in pop)

    def test_seeded(self):
        cfg = H.HgaConfig(pop_size=7)
        a = H.initialize_population(cfg, np.random.default_rng(3), 4)
        b = H.initialize_population(cfg, np.random.default_rng(3), 4)
        assert all(np.array_equal(p.genotype, q.genotype) for p, q in zip(a, b))

    def test_maps_into_box(self):
        dom = BoxDomain.symmetric(6)
        for ind in H.initialize_population(H.HgaConfig(), np.random.default_rng(1), 6):
            assert np.all(np.abs(ind.genotype) <= math.pi / 2)
            assert dom.contains(transform_y_to_x(ind.genotype, dom))

    def test_config_validation(self):
        with pytest.raises(InvalidInputError):
            H.HgaConfig(pop_size=1)
        with pytest.raises(InvalidInputError):
            H.HgaConfig(sim_point_tol=0.0)


class TestRefinement:
    def test_at_optimum(self):
        n = 3
        env = DynamicEnvironment(DynamicsSpec("linear", 0.1, 10**9, n))
        dom = BoxDomain.symmetric(n)
        # move the optimum away from the origin first
        env.offset = type(env.offset)(np.array([1.5, -2.25, 0.75]), 0)
        y = np.arcsin((env.delta - dom.midpoint) / dom.half_span)
        ind = H.Individual(y)
        H.refine_population([ind], env, dom, H.refinement_config(n))
        assert ind.fitness == pytest.approx(0.0, abs=1e-20)
        assert np.allclose(ind.refined, transform_y_to_x(y, dom), atol=1e-12)

    def test_never_worse_than_start(self):
        n = 4
        dom = BoxDomain.symmetric(n)
        env = static_env(n)
        pop = H.initialize_population(H.HgaConfig(pop_size=30), np.random.default_rng(5), n)
        H.refine_population(pop, env, dom, H.refinement_config(n))
        for ind in pop:
            start = shifted_eval(transform_y_to_x(ind.genotype, dom), env.delta)
            assert ind.fitness <= start

    def test_genotype_untouched_and_fitness_consistent(self):
        n = 3
        dom = BoxDomain.symmetric(n)
        env = static_env(n)
        pop = H.initialize_population(H.HgaConfig(pop_size=20), np.random.default_rng(2), n)
        before = [ind.genotype.copy() for ind in pop]
        H.refine_population(pop, env, dom, H.refinement_config(n))
        for ind, y in zip(pop, before):
            assert np.array_equal(ind.genotype, y)
            assert abs(shifted_eval(ind.refined, env.delta) - ind.fitness) <= 1e-12

    def test_cache_and_rerefine_after_change(self):
        n, size = 3, 12
        env = DynamicEnvironment(DynamicsSpec("linear", 0.1, 2000, n))
        pop, env, cfg, rng = refined_pop(n, size, env=env)
        dom = BoxDomain.symmetric(n)
        t = env.clock.t
        assert H.refine_population(pop, env, dom, cfg.local_search(n)) == 0
        assert env.clock.t == t
        while not env.observe_change():
            env.evaluate(np.zeros(n))
        assert H.invalidate_stale(pop, env.clock.epoch) == size
        t = env.clock.t
        assert H.refine_population(pop, env, dom, cfg.local_search(n)) == size
        assert env.clock.t - t >= size

    def test_budget_exhaustion_keeps_partial(self):
        n = 3
        env = static_env(n, budget=25)
        pop = H.initialize_population(H.HgaConfig(pop_size=10), np.random.default_rng(0), n)
        with pytest.raises(BudgetExhausted):
            H.refine_population(pop, env, BoxDomain.symmetric(n), H.refinement_config(n))
        assert env.clock.t == 25
        assert any(ind.is_refined for ind in pop)


class TestSimilarity:
    cfg = H.HgaConfig()

    def ind(self, x, f=None):
        x = np.asarray(x, dtype=float)
        return H.Individual(np.zeros_like(x), x, shifted_eval(x, np.zeros_like(x)) if f is None else f, 0)

    def test_identical(self):
        a = self.ind([0.99, -1.99])
        assert H.similar(a, a.copy(), self.cfg)

    def test_different_basins(self):
        # two local minima of the 1-D landscape, one basin apart
        a, b = self.ind([0.994959]), self.ind([-0.994959])
        assert abs(a.fitness - b.fitness) < 1e-12
        assert not H.similar(a, b, self.cfg)

    def test_equal_fitness_far_apart(self):
        assert not H.similar(self.ind([0.0], 1.0), self.ind([1.0], 1.0), self.cfg)

    def test_unrefined(self):
        with pytest.raises(ContractViolation):
            H.similar(H.Individual(np.zeros(2)), self.ind([0.0, 0.0]), self.cfg)


class TestOperators:
    def test_crossover_examples(self):
        y1, y2 = np.array([0.0, 0.0]), np.array([2.0, 4.0])
        assert np.array_equal(H.crossover(y1, y2, FixedAlpha(1.0)), y1)
        assert np.array_equal(H.crossover(y1, y2, FixedAlpha(0.0)), y2)
        assert np.array_equal(H.crossover(y1, y2, FixedAlpha(0.5)), [1.0, 2.0])

    def test_crossover_length_mismatch(self):
        with pytest.raises(InvalidInputError):
            H.crossover([0.0], [1.0, 2.0], np.random.default_rng(0))

    def test_mutate_normal(self):
        cfg = H.HgaConfig()
        y, kind = H.mutate([0.0, 0.0], [1.0, 0.0], [0.0, 0.0], cfg, np.random.default_rng(0))
        assert np.array_equal(y, [math.pi, 0.0]) and kind == H.MUTATION

    def test_mutate_degenerate(self):
        cfg = H.HgaConfig()
        base = np.array([0.3, -1.0, 2.0])
        y, kind = H.mutate(base, base, base.copy(), cfg, np.random.default_rng(1))
        assert kind == H.MUTATION_DEGENERATE
        assert np.allclose(np.abs(y - base), math.pi, atol=1e-15)

    def test_mutate_override(self):
        cfg = H.HgaConfig()
        args = ([0.1, 0.2], [1.0, 0.0], [0.0, 0.0], cfg)
        a, kind = H.mutate(*args, np.random.default_rng(9), override=True)
        b, _ = H.mutate(*args, np.random.default_rng(9), override=True)
        assert kind == H.MUTATION_OVERRIDE
        assert np.array_equal(a, b)
        assert not np.allclose(a, [0.1 + math.pi, 0.2])

    def test_mutate_length_mismatch(self):
        with pytest.raises(InvalidInputError):
            H.mutate([0.0], [1.0, 0.0], [0.0, 0.0], H.HgaConfig(), np.random.default_rng(0))


class TestGeneration:
    def test_clones_all_mutate(self):
        n, size = 2, 20
        pop, env, cfg, rng = refined_pop(n, size)
        pop = [pop[0].copy() for _ in range(size)]
        children = H.hga_generation(pop, env, BoxDomain.symmetric(n), cfg, rng)
        origins = [c.origin for c in children]
        assert origins.count(H.ELITE) == 1
        assert all(o in (H.MUTATION, H.MUTATION_DEGENERATE, H.ELITE) for o in origins)

    def test_size_and_elitism(self):
        n = 5
        pop, env, cfg, rng = refined_pop(n, 100)
        best = min(p.fitness for p in pop)
        new = H.hga_generation(pop, env, BoxDomain.symmetric(n), cfg, rng)
        assert len(new) == 100
        assert min(p.fitness for p in new) <= best

    def test_branch_attribution(self):
        n, size = 3, 40
        pop, env, cfg, rng = refined_pop(n, size)
        new = H.hga_generation(pop, env, BoxDomain.symmetric(n), cfg, rng)
        kinds = {H.CROSSOVER, H.MUTATION, H.MUTATION_DEGENERATE, H.ELITE}
        assert all(c.origin in kinds for c in new)
        assert len(new) == size

    def test_override_generation_has_no_literal_pi(self):
        n, size = 3, 30
        pop, env, cfg, rng = refined_pop(n, size)
        pop = [pop[0].copy() for _ in range(size)]
        new = H.hga_generation(pop, env, BoxDomain.symmetric(n), cfg, rng, override=True)
        origins = {c.origin for c in new}
        assert H.MUTATION not in origins and H.MUTATION_DEGENERATE not in origins
        assert H.MUTATION_OVERRIDE in origins

    def test_needs_refined(self):
        cfg = H.HgaConfig(pop_size=3)
        pop = H.initialize_population(cfg, np.random.default_rng(0), 2)
        with pytest.raises(ContractViolation):
            H.hga_generation(pop, static_env(2), BoxDomain.symmetric(2), cfg, np.random.default_rng(0))


class TestRun:
    def run(self, seed=0, budget=50_000, dg=5000, kind="linear", n=5):
        trace = RunTrace()
        env = DynamicEnvironment(DynamicsSpec(kind, 0.1, dg, n), seed=1, budget=budget, trace=trace)
        stats = {}
        H.run_hga(env, BoxDomain.symmetric(n), H.HgaConfig(seed=seed), stats)
        return env, trace, stats

    def test_accounting_and_changes(self):
        env, trace, stats = self.run()
        assert len(trace) == env.clock.t == 50_000
        assert trace.changes_seen() == 10
        assert stats["changes_observed"] == 9  # the last change lands on the final evaluation
        assert stats["generations"] > 10

    def test_seed_determinism(self):
        _, a, _ = self.run(seed=3, budget=6000, dg=1000, kind="random")
        _, b, _ = self.run(seed=3, budget=6000, dg=1000, kind="random")
        assert a.values == b.values
        _, c, _ = self.run(seed=4, budget=6000, dg=1000, kind="random")
        assert a.values != c.values

    def test_max_generations(self):
        trace = RunTrace()
        env = DynamicEnvironment(DynamicsSpec("linear", 0.1, 5000, 2), budget=10**6, trace=trace)
        stats = {}
        H.run_hga(env, BoxDomain.symmetric(2), H.HgaConfig(pop_size=10, max_generations=3), stats)
        assert stats["generations"] == 3
        assert len(trace) == env.clock.t < 10**6

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidInputError):
            H.run_hga(static_env(3), BoxDomain.symmetric(2), H.HgaConfig())
