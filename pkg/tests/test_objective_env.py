import math

import numpy as np
import pytest

from dynhga.errors import BudgetExhausted, ContractViolation, InvalidInputError
from dynhga.objective_env import (BoxDomain, DynamicEnvironment, DynamicsKind, DynamicsSpec,
                                  OffsetState, advance_offset, offset_trajectory, rastrigin,
                                  rastrigin_gradient, shifted_eval, transform_y_to_x,
                                  write_offset_csv)


def cosine_form(x):
    x = np.asarray(x, dtype=float)
    return 10 * x.size + float(np.sum(x ** 2 - 10 * np.cos(2 * np.pi * x)))


class TestRastrigin:
    def test_examples(self):
        assert rastrigin(np.zeros(5)) == 0
        assert rastrigin([1, 1]) == pytest.approx(2, abs=1e-12)
        assert rastrigin([0.5]) == pytest.approx(20.25, abs=1e-12)

    def test_matches_cosine_form(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            x = rng.uniform(-50, 50, size=rng.integers(1, 10))
            assert rastrigin(x) == pytest.approx(cosine_form(x), rel=1e-10, abs=1e-9)

    @pytest.mark.parametrize("bad", [[], [1.0, np.nan], [np.inf]])
    def test_rejects(self, bad):
        with pytest.raises(InvalidInputError):
            rastrigin(bad)
        with pytest.raises(InvalidInputError):
            rastrigin_gradient(bad)

    def test_gradient_examples(self):
        assert np.array_equal(rastrigin_gradient([0.0, 0.0]), [0.0, 0.0])
        assert rastrigin_gradient([0.5])[0] == pytest.approx(1.0, abs=1e-12)

    def test_gradient_against_central_differences(self):
        rng = np.random.default_rng(0)
        pts = [np.array([0.3, -0.2])] + [rng.uniform(-5.12, 5.12, size=4) for _ in range(100)]
        h = 1e-6
        for x in pts:
            g = rastrigin_gradient(x)
            fd = np.array([(rastrigin(x + h * e) - rastrigin(x - h * e)) / (2 * h) for e in np.eye(x.size)])
            assert np.all(np.abs(g - fd) <= 1e-4 * np.maximum(1.0, np.abs(g)))


class TestShifted:
    def test_examples(self):
        d = np.array([3.3, -7.0, 12.5])
        assert shifted_eval(d, d) == 0
        assert shifted_eval([1.1, 1.1], [0.1, 0.1]) == pytest.approx(2, abs=1e-9)
        assert shifted_eval([0.5], [0.2]) == pytest.approx(rastrigin([0.3]), abs=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(InvalidInputError):
            shifted_eval([1.0, 2.0], [1.0])


class TestTransform:
    def test_examples(self):
        dom = BoxDomain.symmetric(3)
        assert np.array_equal(transform_y_to_x(np.zeros(3), dom), np.zeros(3))
        assert np.all(transform_y_to_x(np.full(3, np.pi / 2), dom) == dom.lower)
        assert np.all(transform_y_to_x(np.full(3, -np.pi / 2), dom) == dom.upper)

    def test_periodic(self):
        dom = BoxDomain.symmetric(4)
        y = np.random.default_rng(1).uniform(-3, 3, size=4)
        assert np.allclose(transform_y_to_x(y + 2 * np.pi, dom), transform_y_to_x(y, dom), atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidInputError):
            transform_y_to_x(np.zeros(2), BoxDomain.symmetric(3))


class TestOffsets:
    def test_linear_three_updates(self):
        spec = DynamicsSpec("linear", 0.1, 10, 4)
        traj = offset_trajectory(spec, 3)
        assert np.all(traj[3] == 3 * 0.1)

    def test_circular_first_update(self):
        spec = DynamicsSpec("circular", 0.5, 10, 2)
        state = OffsetState.initial(spec)
        assert np.array_equal(state.delta, [0.0, 0.5])
        state = advance_offset(state, spec, 9)
        assert np.allclose(state.delta, [0.0, 1.0], atol=0)
        assert state.update_count == 1

    def test_circular_period(self):
        for n in (2, 5, 15):
            spec = DynamicsSpec("circular", 0.1, 3, n)
            traj = offset_trajectory(spec, 25)
            assert np.max(np.abs(traj[25] - traj[0])) <= 1e-9

    def test_random_reproducible(self):
        spec = DynamicsSpec("random", 0.1, 5, 3)
        a = offset_trajectory(spec, 20, seed=42)
        b = offset_trajectory(spec, 20, seed=42)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, offset_trajectory(spec, 20, seed=43))

    def test_wrong_index(self):
        spec = DynamicsSpec("linear", 0.1, 5, 2)
        with pytest.raises(ContractViolation):
            advance_offset(OffsetState.initial(spec), spec, 3)

    def test_spec_validation(self):
        with pytest.raises(InvalidInputError):
            DynamicsSpec("linear", -0.1, 5, 2)
        with pytest.raises(InvalidInputError):
            DynamicsSpec("linear", 0.1, 0, 2)
        with pytest.raises(InvalidInputError):
            DynamicsSpec("spiral", 0.1, 5, 2)
        assert DynamicsKind.parse("Circular") is DynamicsKind.CIRCULAR

    def test_offset_csv(self, tmp_path):
        spec = DynamicsSpec("linear", 0.5, 5, 2)
        path = tmp_path / "o.csv"
        write_offset_csv(path, offset_trajectory(spec, 2))
        lines = path.read_text().splitlines()
        assert lines[0] == "update_index,delta_1,delta_2"
        assert lines[-1] == "2,1.0,1.0"


class TestEnvironment:
    def test_hand_trace(self):
        env = DynamicEnvironment(DynamicsSpec("linear", 0.1, 2, 3))
        x = np.zeros(3)
        got = [env.evaluate(x) for _ in range(4)]
        want = [shifted_eval(x, np.full(3, d)) for d in (0.0, 0.0, 0.1, 0.1)]
        assert got == want

    def test_first_eval_at_optimum(self):
        for kind in ("linear", "circular", "random"):
            env = DynamicEnvironment(DynamicsSpec(kind, 0.3, 4, 3), seed=1)
            assert env.evaluate(env.true_optimum()[0]) == 0

    def test_epoch(self):
        env = DynamicEnvironment(DynamicsSpec("linear", 0.1, 5, 2))
        for _ in range(10):
            env.evaluate([1.0, 1.0])
        assert env.clock.epoch == 2 and env.clock.t == 10

    def test_observe_change_read_once(self):
        env = DynamicEnvironment(DynamicsSpec("linear", 0.1, 3, 2))
        assert not env.observe_change()
        for _ in range(3):
            env.evaluate([0.0, 0.0])
        assert env.observe_change()
        assert not env.observe_change()

    def test_true_optimum(self):
        env = DynamicEnvironment(DynamicsSpec("linear", 0.1, 1, 3))
        d, f = env.true_optimum()
        assert np.array_equal(d, np.zeros(3)) and f == 0
        for _ in range(3):
            env.evaluate(np.ones(3))
        d, f = env.true_optimum()
        assert np.allclose(d, 0.3, atol=1e-15) and f == 0
        assert env.evaluate(d) == 0

    def test_budget(self):
        env = DynamicEnvironment(DynamicsSpec("linear", 0.1, 5, 2), budget=3)
        for _ in range(3):
            env.evaluate([0.0, 0.0])
        with pytest.raises(BudgetExhausted):
            env.evaluate([0.0, 0.0])

    def test_gradient_is_free(self):
        env = DynamicEnvironment(DynamicsSpec("linear", 0.1, 5, 2))
        env.gradient([0.2, 0.1])
        assert env.clock.t == 0

    def test_evaluate_many_matches_sequential(self):
        pts = np.random.default_rng(2).uniform(-50, 50, size=(23, 3))
        for kind in ("linear", "circular", "random"):
            a = DynamicEnvironment(DynamicsSpec(kind, 0.2, 4, 3), seed=9)
            b = DynamicEnvironment(DynamicsSpec(kind, 0.2, 4, 3), seed=9)
            many = a.evaluate_many(pts)
            seq = [b.evaluate(p) for p in pts]
            assert many.tolist() == seq
            assert np.array_equal(a.delta, b.delta) and a.clock == b.clock

    def test_evaluate_many_partial_budget(self):
        env = DynamicEnvironment(DynamicsSpec("linear", 0.1, 5, 2), budget=7)
        with pytest.raises(BudgetExhausted):
            env.evaluate_many(np.zeros((10, 2)))
        assert env.clock.t == 7

    def test_charge_cannot_straddle(self):
        env = DynamicEnvironment(DynamicsSpec("linear", 0.1, 5, 2))
        env.evaluate([0.0, 0.0])
        assert env.allowance(100) == 4
        with pytest.raises(ContractViolation):
            env.charge([1.0] * 5)
        env.charge([1.0] * 4)
        assert env.clock.epoch == 1 and env.observe_change()

    def test_bad_shape(self):
        env = DynamicEnvironment(DynamicsSpec("linear", 0.1, 5, 2))
        with pytest.raises(InvalidInputError):
            env.evaluate([0.0, 0.0, 0.0])

    def test_degenerate_update_every_eval(self):
        env = DynamicEnvironment(DynamicsSpec("linear", 0.25, 1, 1))
        vals = [env.evaluate([0.0]) for _ in range(3)]
        assert vals == [rastrigin([0.0]), rastrigin([-0.25]), rastrigin([-0.5])]
        assert math.isclose(env.delta[0], 0.75)


# ---------------------------------------------------------------- properties

from hypothesis import given, settings  # noqa: E402
from hypothesis import strategies as st  # noqa: E402

props = settings(max_examples=1000, deadline=None, derandomize=True, database=None)


@props
@given(st.integers(1, 8), st.integers(0, 2**32 - 1), st.floats(1e-12, 100))
def test_rastrigin_non_negative(n, seed, scale):
    x = np.random.default_rng(seed).uniform(-scale, scale, size=n)
    v = rastrigin(x)
    assert v >= 0
    if np.max(np.abs(x)) > 1e-7:
        assert v > 0


@props
@given(st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_translation_equivariance(n, seed):
    rng = np.random.default_rng(seed)
    x, d, c = rng.uniform(-100, 100, size=(3, n))
    # exact whenever the shifted difference is reproduced bit for bit
    if np.array_equal((x + c) - (d + c), x - d):
        assert shifted_eval(x + c, d + c) == shifted_eval(x, d)
    assert math.isclose(shifted_eval(x + c, d + c), shifted_eval(x, d), rel_tol=1e-9, abs_tol=1e-6)
    x = rng.integers(-50, 50, size=n).astype(float)
    d = rng.integers(-50, 50, size=n).astype(float)
    c = rng.integers(-50, 50, size=n).astype(float)
    assert shifted_eval(x + c, d + c) == shifted_eval(x, d)


@props
@given(st.sampled_from([0.0, 1e-3, 0.01, 0.1, 0.5, 1.0, 3.7]), st.integers(0, 10_000), st.integers(1, 20))
def test_linear_closed_form(s, k, n):
    spec = DynamicsSpec("linear", s, 7, n)
    state = OffsetState(np.full(n, (k - 1) * s if k else 0.0), max(k - 1, 0))
    if k:
        state = advance_offset(state, spec, 6)
    assert np.all(state.delta == k * s)


@props
@given(st.integers(1, 6), st.integers(0, 2**32 - 1), st.floats(0.1, 100))
def test_transform_box_and_period(n, seed, bound):
    dom = BoxDomain.symmetric(n, bound)
    y = np.random.default_rng(seed).uniform(-20, 20, size=n)
    x = transform_y_to_x(y, dom)
    assert dom.contains(x)
    assert np.allclose(transform_y_to_x(y + 2 * np.pi, dom), x, rtol=0, atol=1e-12 * bound)
