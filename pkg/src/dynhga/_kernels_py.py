"""Pure-Python refinement kernel, used when the compiled extension is absent.

A line-for-line scalar port of ``_kernels.pyx``: same operation order, same
libm calls, so both backends produce bit-identical trajectories.
"""
import math

import numpy as np

CURVATURE_EPS = 1e-10
MAX_CURVATURE_SKIPS = 3
_PI = math.pi


class _Problem:
    __slots__ = ("n", "delta", "mid", "half", "lower", "upper", "values", "max_evals")

    def __init__(self, delta, lower, upper, max_evals):
        self.n = len(delta)
        self.delta = delta
        self.lower = lower
        self.upper = upper
        self.mid = [(a + b) / 2.0 for a, b in zip(lower, upper)]
        self.half = [(a - b) / 2.0 for a, b in zip(lower, upper)]
        self.values = []
        self.max_evals = max_evals

    def evaluate(self, y):
        """``(x, f, g)`` at ``y`` or ``None`` when the budget is spent."""
        if len(self.values) >= self.max_evals:
            return None
        total = 0.0
        x = [0.0] * self.n
        g = [0.0] * self.n
        for i in range(self.n):
            xi = self.mid[i] + self.half[i] * math.sin(y[i])
            if xi < self.lower[i]:
                xi = self.lower[i]
            elif xi > self.upper[i]:
                xi = self.upper[i]
            x[i] = xi
            z = xi - self.delta[i]
            s = math.sin(_PI * z)
            total += z * z + 20.0 * s * s
            g[i] = (2.0 * z + 20.0 * _PI * math.sin(2.0 * _PI * z)) * (self.half[i] * math.cos(y[i]))
        self.values.append(total)
        return x, total, g


def _dot(a, b):
    acc = 0.0
    for u, v in zip(a, b):
        acc += u * v
    return acc


def _interpolate(a, fa, da, b, fb, db):
    lo, hi = (a, b) if a < b else (b, a)
    w = hi - lo
    t = 0.0
    ok = False
    if da * db < 0:
        t = a - da * (b - a) / (db - da)
        ok = True
    else:
        d1 = da + db - 3.0 * (fa - fb) / (a - b)
        rad = d1 * d1 - da * db
        if rad >= 0.0:
            d2 = math.copysign(math.sqrt(rad), b - a)
            denom = db - da + 2.0 * d2
            if denom != 0.0:
                t = b - (b - a) * (db + d2 - d1) / denom
                ok = True
    if not ok or not math.isfinite(t):
        return lo + 0.5 * w
    if t < lo + 0.1 * w:
        t = lo + 0.1 * w
    if t > hi - 0.1 * w:
        t = hi - 0.1 * w
    return t


class _Slot:
    __slots__ = ("a", "y", "x", "f", "g", "d")

    def __init__(self, a, y, x, f, g, d):
        self.a, self.y, self.x, self.f, self.g, self.d = a, y, x, f, g, d


def _phi(p, base, d, a):
    y = [base.y[i] + a * d[i] for i in range(p.n)]
    out = p.evaluate(y)
    if out is None:
        return None
    x, f, g = out
    return _Slot(a, y, x, f, g, _dot(g, d))


def _zoom(p, base, d, lo, hi, f0, dphi0, c1, c2):
    while True:
        width = abs(hi.a - lo.a)
        if width <= 1e-14 * max(1.0, abs(lo.a)) or len(p.values) >= p.max_evals:
            return lo
        a = _interpolate(lo.a, lo.f, lo.d, hi.a, hi.f, hi.d)
        cur = _phi(p, base, d, a)
        if cur is None:
            return lo
        if cur.f > f0 + c1 * a * dphi0 or cur.f >= lo.f:
            hi = cur
        else:
            if abs(cur.d) <= -c2 * dphi0:
                return cur
            if cur.d * (hi.a - lo.a) >= 0:
                hi = lo
            lo = cur


def _search(p, base, d, c1, c2, max_step, first_step):
    f0 = base.f
    dphi0 = base.d
    alpha_max = max_step / math.sqrt(_dot(d, d))
    a = first_step if first_step < alpha_max else alpha_max
    prev = base
    first = True
    while True:
        cur = _phi(p, base, d, a)
        if cur is None:
            return prev if prev.a > 0 else None
        if cur.f > f0 + c1 * a * dphi0 or (not first and cur.f >= prev.f):
            best = _zoom(p, base, d, prev, cur, f0, dphi0, c1, c2)
            break
        if abs(cur.d) <= -c2 * dphi0:
            best = cur
            break
        if cur.d >= 0:
            best = _zoom(p, base, d, cur, prev, f0, dphi0, c1, c2)
            break
        if a >= alpha_max:
            best = cur
            break
        prev = cur
        a = 2.0 * a if 2.0 * a < alpha_max else alpha_max
        first = False
    if best is base or best.a <= 0 or best.f >= f0:
        return None
    return best


def _identity(n, scale):
    return [[scale if i == j else 0.0 for j in range(n)] for i in range(n)]


def refine_sine_rastrigin(y0, delta, lower, upper, max_iterations, grad_tolerance,
                          max_evals, c1, c2, max_step, initial_step=1.0):
    y0 = [float(v) for v in np.asarray(y0, dtype=float)]
    delta = [float(v) for v in np.asarray(delta, dtype=float)]
    lower = [float(v) for v in np.asarray(lower, dtype=float)]
    upper = [float(v) for v in np.asarray(upper, dtype=float)]
    n = len(y0)
    if len(delta) != n or len(lower) != n or len(upper) != n:
        raise ValueError("length mismatch between y0, delta and bounds")
    if max_evals < 1:
        raise ValueError("max_evals must be >= 1")
    p = _Problem(delta, lower, upper, max_evals)
    x, f, g = p.evaluate(y0)
    cur = _Slot(0.0, y0, x, f, g, 0.0)

    H = _identity(n, 1.0)
    fresh = True
    skips = 0
    iterations = 0
    while iterations < max_iterations and max(abs(v) for v in cur.g) >= grad_tolerance:
        if len(p.values) >= p.max_evals:
            break
        d = [0.0] * n
        for i in range(n):
            acc = 0.0
            Hi = H[i]
            for j in range(n):
                acc += Hi[j] * cur.g[j]
            d[i] = -acc
        if not _dot(cur.g, d) < 0:
            H = _identity(n, 1.0)
            fresh = True
            d = [-v for v in cur.g]
        cur.a = 0.0
        cur.d = _dot(cur.g, d)
        if fresh:
            gnorm = math.sqrt(_dot(cur.g, cur.g))
            first_step = initial_step / gnorm if initial_step / gnorm < 1.0 else 1.0
        else:
            first_step = 1.0
        best = _search(p, cur, d, c1, c2, max_step, first_step)
        if best is None:
            if fresh:
                break
            H = _identity(n, 1.0)
            fresh = True
            continue
        iterations += 1
        s = [best.y[i] - cur.y[i] for i in range(n)]
        yd = [best.g[i] - cur.g[i] for i in range(n)]
        sy = _dot(s, yd)
        if sy > CURVATURE_EPS:
            if fresh:
                H = _identity(n, sy / _dot(yd, yd))
            Hy = [0.0] * n
            for i in range(n):
                acc = 0.0
                Hi = H[i]
                for j in range(n):
                    acc += Hi[j] * yd[j]
                Hy[i] = acc
            yHy = _dot(yd, Hy)
            coef = (sy + yHy) / (sy * sy)
            for i in range(n):
                Hi = H[i]
                for j in range(n):
                    Hi[j] = Hi[j] + coef * s[i] * s[j] - (Hy[i] * s[j] + s[i] * Hy[j]) / sy
            fresh = False
            skips = 0
        else:
            skips += 1
            if skips >= MAX_CURVATURE_SKIPS:
                H = _identity(n, 1.0)
                fresh = True
                skips = 0
        cur = best

    converged = max(abs(v) for v in cur.g) < grad_tolerance
    return (np.array(cur.y), np.array(cur.x), float(cur.f), iterations, len(p.values),
            bool(converged), np.array(p.values))
