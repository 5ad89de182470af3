"""Translated-Rastrigin dynamic environments.

The objective is the Rastrigin function shifted by an offset vector that
moves every ``update_freq`` evaluations along one of three trajectories
(linear, circular, random). Time is the evaluation counter: every call to
:meth:`DynamicEnvironment.evaluate` ticks the clock, and the offset update
fires right after the evaluation whose 1-based index is a multiple of
``update_freq``.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import BudgetExhausted, ContractViolation, InvalidInputError

TWO_PI = 2.0 * math.pi


def _as_vector(x, name="x"):
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidInputError(f"{name} must be a non-empty 1-D vector")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} has non-finite components")
    return arr


def _rastrigin_raw(z):
    # z^2 - 10 cos(2 pi z) + 10 == z^2 + 20 sin^2(pi z), without cancellation near 0
    s = np.sin(np.pi * z)
    # cumsum adds left to right like the refinement kernels, so values agree bit for bit
    return np.cumsum(z * z + 20.0 * s * s, axis=-1)[..., -1]


def _rastrigin_grad_raw(z):
    return 2.0 * z + 20.0 * np.pi * np.sin(TWO_PI * z)


def rastrigin(x) -> float:
    """Rastrigin value ``10n + sum(x_i^2 - 10 cos(2 pi x_i))``; 0 at the origin."""
    return float(_rastrigin_raw(_as_vector(x)))


def rastrigin_gradient(x) -> np.ndarray:
    return _rastrigin_grad_raw(_as_vector(x))


def shifted_eval(x, delta) -> float:
    """Rastrigin of ``x - delta``."""
    x = _as_vector(x)
    delta = _as_vector(delta, "delta")
    if x.shape != delta.shape:
        raise InvalidInputError(f"length mismatch: x has {x.size}, delta has {delta.size}")
    return float(_rastrigin_raw(x - delta))


@dataclass(frozen=True, eq=False)
class BoxDomain:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).reshape(-1)
        hi = np.asarray(self.upper, dtype=float).reshape(-1)
        if lo.shape != hi.shape or lo.size == 0:
            raise InvalidInputError("lower and upper must be non-empty and equally long")
        if not np.all(lo < hi):
            raise InvalidInputError("every lower bound must be below its upper bound")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def symmetric(cls, dimension: int, bound: float = 50.0) -> "BoxDomain":
        return cls(np.full(dimension, -bound), np.full(dimension, bound))

    @property
    def dimension(self) -> int:
        return self.lower.size

    @property
    def midpoint(self) -> np.ndarray:
        return (self.lower + self.upper) / 2.0

    @property
    def half_span(self) -> np.ndarray:
        # (a - b)/2, negative by construction
        return (self.lower - self.upper) / 2.0

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    def clip(self, x) -> np.ndarray:
        return np.clip(x, self.lower, self.upper)

    def uniform(self, rng, size=None) -> np.ndarray:
        shape = (self.dimension,) if size is None else (size, self.dimension)
        return rng.uniform(self.lower, self.upper, size=shape)


def transform_y_to_x(y, domain: BoxDomain) -> np.ndarray:
    """Map an unconstrained genotype onto the box: ``x = mid + (a-b)/2 * sin(y)``."""
    y = np.asarray(y, dtype=float)
    if y.shape[-1:] != (domain.dimension,):
        raise InvalidInputError(
            f"dimension mismatch: y has {y.shape[-1] if y.ndim else 1}, domain has {domain.dimension}"
        )
    return domain.clip(domain.midpoint + domain.half_span * np.sin(y))


class DynamicsKind(str, enum.Enum):
    LINEAR = "linear"
    CIRCULAR = "circular"
    RANDOM = "random"

    @classmethod
    def parse(cls, value) -> "DynamicsKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise InvalidInputError(
                f"unknown dynamics kind {value!r}; expected one of {[k.value for k in cls]}"
            ) from None


@dataclass(frozen=True)
class DynamicsSpec:
    kind: DynamicsKind
    severity: float
    update_freq: int
    dimension: int
    gamma: int = 25

    def __post_init__(self):
        object.__setattr__(self, "kind", DynamicsKind.parse(self.kind))
        if not (self.severity >= 0 and math.isfinite(self.severity)):
            raise InvalidInputError(f"severity must be finite and >= 0, got {self.severity}")
        if int(self.update_freq) != self.update_freq or self.update_freq < 1:
            raise InvalidInputError(f"update_freq must be an integer >= 1, got {self.update_freq}")
        if int(self.gamma) != self.gamma or self.gamma < 1:
            raise InvalidInputError(f"gamma must be an integer >= 1, got {self.gamma}")
        if int(self.dimension) != self.dimension or self.dimension < 1:
            raise InvalidInputError(f"dimension must be an integer >= 1, got {self.dimension}")


@dataclass(frozen=True, eq=False)
class OffsetState:
    delta: np.ndarray
    update_count: int = 0

    @classmethod
    def initial(cls, spec: DynamicsSpec) -> "OffsetState":
        delta = np.zeros(spec.dimension)
        if spec.kind is DynamicsKind.CIRCULAR:
            # 1-based parity: coordinate 1 is odd and starts at 0, coordinate 2 starts at s
            delta[1::2] = spec.severity
        return cls(delta, 0)


def circular_direction(spec: DynamicsSpec, t: int) -> np.ndarray:
    """Per-coordinate factor c(i, t): sin for odd (1-based) i, cos for even i."""
    phase = TWO_PI * (t // spec.update_freq) / spec.gamma
    c = np.empty(spec.dimension)
    c[0::2] = math.sin(phase)
    c[1::2] = math.cos(phase)
    return c


def advance_offset(state: OffsetState, spec: DynamicsSpec, t: int, rng=None) -> OffsetState:
    """Apply one offset update at 0-based evaluation index ``t``.

    Only legal when ``(t + 1) % update_freq == 0``.
    """
    if (t + 1) % spec.update_freq != 0:
        raise ContractViolation(
            f"offset update requested at t={t}, which is not an update index for update_freq={spec.update_freq}"
        )
    k = state.update_count + 1
    if spec.kind is DynamicsKind.LINEAR:
        # closed form keeps k*s exact instead of accumulating rounding
        delta = np.full(spec.dimension, k * spec.severity)
    elif spec.kind is DynamicsKind.CIRCULAR:
        delta = state.delta + spec.severity * circular_direction(spec, t)
    else:
        if rng is None:
            raise ContractViolation("random dynamics need a random source")
        delta = state.delta + spec.severity * rng.standard_normal(spec.dimension)
    return OffsetState(delta, k)


@dataclass
class EvalClock:
    t: int = 0
    epoch: int = 0
    changed_since_last_read: bool = False


class DynamicEnvironment:
    """Shifted Rastrigin whose offset moves with the evaluation count.

    ``budget`` caps the total number of evaluations; asking for more raises
    :class:`BudgetExhausted`. When a trace is attached, every evaluation is
    appended to it in order.
    """

    optimum_value = 0.0

    def __init__(self, spec: DynamicsSpec, seed=None, budget=None, trace=None):
        self.spec = spec
        self.offset = OffsetState.initial(spec)
        self.clock = EvalClock()
        self.rng_stream = np.random.default_rng(seed) if spec.kind is DynamicsKind.RANDOM else None
        if budget is not None and budget < 0:
            raise InvalidInputError("budget must be non-negative")
        self.budget = budget
        self.trace = trace

    @property
    def dimension(self) -> int:
        return self.spec.dimension

    @property
    def delta(self) -> np.ndarray:
        return self.offset.delta

    def remaining(self):
        if self.budget is None:
            return None
        return self.budget - self.clock.t

    def evals_until_change(self) -> int:
        """Evaluations left in the current epoch, counting the one that triggers the update."""
        return self.spec.update_freq - self.clock.t % self.spec.update_freq

    def allowance(self, cap: int) -> int:
        """Largest batch (at most ``cap``) that stays inside both the epoch and the budget."""
        n = min(cap, self.evals_until_change())
        rem = self.remaining()
        if rem is not None:
            if rem <= 0:
                raise BudgetExhausted(f"evaluation budget of {self.budget} exhausted")
            n = min(n, rem)
        return n

    def _check_x(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.spec.dimension,):
            raise InvalidInputError(f"expected a vector of length {self.spec.dimension}, got shape {x.shape}")
        return x

    def evaluate(self, x) -> float:
        x = self._check_x(x)
        if self.budget is not None and self.clock.t >= self.budget:
            raise BudgetExhausted(f"evaluation budget of {self.budget} exhausted")
        value = float(_rastrigin_raw(x - self.offset.delta))
        self._tick(value)
        return value

    __call__ = evaluate

    def gradient(self, x) -> np.ndarray:
        """Analytic gradient at the current offset; does not tick the clock."""
        return _rastrigin_grad_raw(self._check_x(x) - self.offset.delta)

    def evaluate_many(self, points) -> np.ndarray:
        """Evaluate rows in order, exactly as repeated :meth:`evaluate` calls would.

        If the budget runs out part-way, the evaluated prefix is recorded and
        :class:`BudgetExhausted` is raised.
        """
        X = np.asarray(points, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.spec.dimension:
            raise InvalidInputError(f"expected an (m, {self.spec.dimension}) array, got shape {X.shape}")
        out = np.empty(X.shape[0])
        i = 0
        while i < X.shape[0]:
            m = self.allowance(X.shape[0] - i)
            vals = _rastrigin_raw(X[i:i + m] - self.offset.delta)
            out[i:i + m] = vals
            self.charge(vals)
            i += m
        return out

    def charge(self, values) -> None:
        """Account for evaluations computed elsewhere against the current offset.

        ``values`` must fit in :meth:`allowance`; only the last of them may
        land on an update index.
        """
        values = list(values)
        if not values:
            return
        if len(values) > self.evals_until_change():
            raise ContractViolation("a charged batch may not straddle an offset update")
        rem = self.remaining()
        if rem is not None and len(values) > rem:
            raise BudgetExhausted(f"evaluation budget of {self.budget} exhausted")
        for v in values:
            self._tick(float(v))

    def _tick(self, value: float) -> None:
        clock = self.clock
        if self.trace is not None:
            self.trace.append(value, clock.t + 1, clock.epoch, self.optimum_value)
        t = clock.t
        clock.t = t + 1
        if clock.t % self.spec.update_freq == 0:
            self.offset = advance_offset(self.offset, self.spec, t, self.rng_stream)
            clock.epoch += 1
            clock.changed_since_last_read = True
            if self.trace is not None:
                self.trace.mark_change(clock.t)

    def observe_change(self) -> bool:
        """Return and clear the change flag."""
        flag = self.clock.changed_since_last_read
        self.clock.changed_since_last_read = False
        return flag

    def true_optimum(self):
        return self.offset.delta.copy(), self.optimum_value


def offset_trajectory(spec: DynamicsSpec, n_updates: int, seed=None) -> np.ndarray:
    """Offsets after 0..n_updates updates, one row each."""
    rng = np.random.default_rng(seed) if spec.kind is DynamicsKind.RANDOM else None
    state = OffsetState.initial(spec)
    rows = [state.delta]
    for k in range(n_updates):
        state = advance_offset(state, spec, (k + 1) * spec.update_freq - 1, rng)
        rows.append(state.delta)
    return np.array(rows)


def write_offset_csv(path, trajectory: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["update_index"] + [f"delta_{i + 1}" for i in range(trajectory.shape[1])])
        for k, row in enumerate(trajectory):
            w.writerow([k] + [repr(float(v)) for v in row])
