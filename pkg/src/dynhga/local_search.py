"""Budget-aware BFGS with a strong-Wolfe line search.

Every trial point costs one objective evaluation. When no gradient is
supplied, central differences are used and their 2n evaluations are charged
to the same budget.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ContractViolation, InvalidInputError, NumericFailure

CURVATURE_EPS = 1e-10
MAX_CURVATURE_SKIPS = 3
FD_STEP = 1e-6


@dataclass(frozen=True)
class LsConfig:
    max_iterations: int = 20
    grad_tolerance: float = 1e-6
    eval_budget: int = 50
    wolfe_c1: float = 1e-4
    wolfe_c2: float = 0.9
    max_step: float = 10.0
    # length of the first trial step whenever the inverse Hessian is the identity
    initial_step: float = 1.0

    def __post_init__(self):
        if not 0 < self.wolfe_c1 < self.wolfe_c2 < 1:
            raise InvalidInputError("need 0 < wolfe_c1 < wolfe_c2 < 1")
        if self.max_iterations < 1 or self.eval_budget < 1:
            raise InvalidInputError("max_iterations and eval_budget must be >= 1")
        if not (self.max_step > 0 and self.grad_tolerance > 0 and self.initial_step > 0):
            raise InvalidInputError("max_step, grad_tolerance and initial_step must be positive")

    @classmethod
    def for_dimension(cls, n: int, **overrides) -> "LsConfig":
        """Default refinement budget of ``40 + 2n`` evaluations."""
        overrides.setdefault("eval_budget", 40 + 2 * n)
        return cls(**overrides)

    def with_budget(self, eval_budget: int) -> "LsConfig":
        return replace(self, eval_budget=eval_budget)


@dataclass
class LsResult:
    x_opt: np.ndarray
    f_opt: float
    iterations_used: int
    evals_used: int
    converged: bool


class _OutOfBudget(Exception):
    pass


class _Oracle:
    """Counts evaluations and enforces the budget.

    ``bounds`` (lower, upper) projects every trial point onto the box first.
    """

    def __init__(self, objective, gradient, budget, bounds=None):
        self.objective = objective
        self.gradient = gradient
        self.budget = budget
        self.bounds = bounds
        self.evals = 0
        self.best_x = None
        self.best_f = math.inf

    @property
    def left(self):
        return self.budget - self.evals

    def _f(self, x):
        if self.evals >= self.budget:
            raise _OutOfBudget
        self.evals += 1
        return float(self.objective(x))

    def __call__(self, x):
        if self.bounds is not None:
            x = np.clip(x, self.bounds[0], self.bounds[1])
        f = self._f(x)
        if self.gradient is not None:
            g = np.asarray(self.gradient(x), dtype=float)
        else:
            g = self._central_difference(x)
        if not (math.isfinite(f) and np.all(np.isfinite(g))):
            raise NumericFailure("non-finite objective or gradient", self.best_x, self.best_f)
        if f < self.best_f:
            self.best_x, self.best_f = x.copy(), f
        return x, f, g

    def _central_difference(self, x):
        if self.left < 2 * x.size:
            raise _OutOfBudget
        g = np.empty_like(x)
        for i in range(x.size):
            e = np.zeros_like(x)
            e[i] = FD_STEP
            g[i] = (self._f(x + e) - self._f(x - e)) / (2 * FD_STEP)
        return g


def _interpolate(a, fa, da, b, fb, db):
    """Trial step inside the bracket [a, b], kept 10% away from both ends.

    Slopes of opposite sign give a secant step on the derivative (exact on
    quadratics, immune to cancellation in f); otherwise the cubic through
    both values and slopes is minimized.
    """
    lo, hi = min(a, b), max(a, b)
    w = hi - lo
    t = math.nan
    if da * db < 0:
        t = a - da * (b - a) / (db - da)
    else:
        d1 = da + db - 3.0 * (fa - fb) / (a - b)
        rad = d1 * d1 - da * db
        if rad >= 0.0:
            d2 = math.copysign(math.sqrt(rad), b - a)
            denom = db - da + 2.0 * d2
            if denom != 0.0:
                t = b - (b - a) * (db + d2 - d1) / denom
    if not math.isfinite(t):
        return lo + 0.5 * w
    return min(max(t, lo + 0.1 * w), hi - 0.1 * w)


def _search(oracle, x, f0, g0, d, c1, c2, max_step, first_step=1.0):
    """Strong-Wolfe search along ``d`` from ``x``.

    Returns ``(alpha, x_new, f_new, g_new)``; ``alpha == 0`` means no
    acceptable point was found within the budget.
    """
    dphi0 = float(g0 @ d)
    alpha_max = max_step / float(np.linalg.norm(d))
    none = (0.0, x, f0, g0)

    def phi(a):
        xa, fa, ga = oracle(x + a * d)
        return xa, fa, ga, float(ga @ d)

    def zoom(lo, hi):
        # lo = (alpha, x, f, g, dphi) satisfying sufficient decrease with the lowest f so far
        while True:
            w = abs(hi[0] - lo[0])
            if w <= 1e-14 * max(1.0, abs(lo[0])) or oracle.left <= 0:
                return lo
            a = _interpolate(lo[0], lo[2], lo[4], hi[0], hi[2], hi[4])
            try:
                xa, fa, ga, da = phi(a)
            except _OutOfBudget:
                return lo
            cur = (a, xa, fa, ga, da)
            if fa > f0 + c1 * a * dphi0 or fa >= lo[2]:
                hi = cur
            else:
                if abs(da) <= -c2 * dphi0:
                    return cur
                if da * (hi[0] - lo[0]) >= 0:
                    hi = lo
                lo = cur

    prev = (0.0, x, f0, g0, dphi0)
    a = min(first_step, alpha_max)
    first = True
    while True:
        try:
            xa, fa, ga, da = phi(a)
        except _OutOfBudget:
            return prev[:4] if prev[0] > 0 else none
        cur = (a, xa, fa, ga, da)
        if fa > f0 + c1 * a * dphi0 or (not first and fa >= prev[2]):
            best = zoom(prev, cur)
            break
        if abs(da) <= -c2 * dphi0:
            best = cur
            break
        if da >= 0:
            best = zoom(cur, prev)
            break
        if a >= alpha_max:
            best = cur
            break
        prev = cur
        a = min(2.0 * a, alpha_max)
        first = False
    if best[0] <= 0 or best[2] >= f0:
        return none
    return best[:4]


def wolfe_line_search(objective, gradient, x, direction, cfg: LsConfig) -> float:
    """Step length along ``direction`` satisfying the strong Wolfe conditions.

    If the evaluation budget runs out first, the largest step found with
    sufficient decrease is returned (0.0 when there is none).
    """
    x = np.asarray(x, dtype=float)
    d = np.asarray(direction, dtype=float)
    oracle = _Oracle(objective, gradient, cfg.eval_budget)
    _, f0, g0 = oracle(x)
    if not float(g0 @ d) < 0:
        raise ContractViolation("line search direction is not a descent direction")
    alpha, *_ = _search(oracle, x, f0, g0, d, cfg.wolfe_c1, cfg.wolfe_c2, cfg.max_step)
    return alpha


def bfgs_minimize(objective, gradient, x0, cfg: LsConfig, bounds=None) -> LsResult:
    """Minimize ``objective`` from ``x0`` with at most ``cfg.eval_budget`` evaluations.

    ``gradient`` may be ``None`` for finite differences. ``bounds`` is an
    optional ``(lower, upper)`` pair; trial points are clamped onto the box.
    """
    x = np.array(x0, dtype=float)
    if x.ndim != 1 or not np.all(np.isfinite(x)):
        raise InvalidInputError("x0 must be a finite 1-D vector")
    oracle = _Oracle(objective, gradient, cfg.eval_budget, bounds)
    try:
        x, f, g = oracle(x)
    except _OutOfBudget:
        raise InvalidInputError("eval_budget cannot cover the starting point") from None
    n = x.size
    H = np.eye(n)
    fresh = True
    skips = 0
    iterations = 0
    while iterations < cfg.max_iterations and np.max(np.abs(g)) >= cfg.grad_tolerance:
        if oracle.left <= 0:
            break
        d = -(H @ g)
        if not float(g @ d) < 0:
            H = np.eye(n)
            fresh = True
            d = -g
        first_step = min(1.0, cfg.initial_step / float(np.linalg.norm(g))) if fresh else 1.0
        alpha, x_new, f_new, g_new = _search(oracle, x, f, g, d, cfg.wolfe_c1, cfg.wolfe_c2,
                                             cfg.max_step, first_step)
        if alpha == 0.0:
            if fresh:
                break
            H = np.eye(n)
            fresh = True
            continue
        iterations += 1
        s = x_new - x
        y = g_new - g
        sy = float(s @ y)
        if sy > CURVATURE_EPS:
            if fresh:
                H = np.eye(n) * (sy / float(y @ y))
            Hy = H @ y
            yHy = float(y @ Hy)
            H = H + ((sy + yHy) / (sy * sy)) * np.outer(s, s) - (np.outer(Hy, s) + np.outer(s, Hy)) / sy
            fresh = False
            skips = 0
        else:
            skips += 1
            if skips >= MAX_CURVATURE_SKIPS:
                H = np.eye(n)
                fresh = True
                skips = 0
        x, f, g = x_new, f_new, g_new
    return LsResult(x, f, iterations, oracle.evals, bool(np.max(np.abs(g)) < cfg.grad_tolerance))
