# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled refinement kernel: BFGS on the sine-transformed shifted Rastrigin.

Mirrors ``local_search.bfgs_minimize`` step for step, with the objective
inlined. Slot 0 of the work arrays holds the current iterate; slots 1-3 are
line-search trial points.
"""
import numpy as np

from libc.math cimport sin, cos, sqrt, fabs, copysign, isfinite, M_PI

cdef double CURVATURE_EPS = 1e-10
cdef int MAX_CURVATURE_SKIPS = 3


cdef struct Problem:
    Py_ssize_t n
    double* delta
    double* mid
    double* half
    double* lower
    double* upper
    double* values
    Py_ssize_t evals
    Py_ssize_t max_evals


cdef inline bint _evaluate(Problem* p, double* y, double* x, double* g, double* f) noexcept nogil:
    """Value and y-gradient at ``y``; False when the budget is spent."""
    cdef Py_ssize_t i
    cdef double total = 0.0, xi, z, s
    if p.evals >= p.max_evals:
        return False
    for i in range(p.n):
        xi = p.mid[i] + p.half[i] * sin(y[i])
        if xi < p.lower[i]:
            xi = p.lower[i]
        elif xi > p.upper[i]:
            xi = p.upper[i]
        x[i] = xi
        z = xi - p.delta[i]
        s = sin(M_PI * z)
        total += z * z + 20.0 * s * s
        g[i] = (2.0 * z + 20.0 * M_PI * sin(2.0 * M_PI * z)) * (p.half[i] * cos(y[i]))
    p.values[p.evals] = total
    p.evals += 1
    f[0] = total
    return True


cdef inline double _dot(double* a, double* b, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i
    cdef double acc = 0.0
    for i in range(n):
        acc += a[i] * b[i]
    return acc


cdef inline double _interpolate(double a, double fa, double da,
                                double b, double fb, double db) noexcept nogil:
    cdef double lo = a if a < b else b
    cdef double hi = b if a < b else a
    cdef double w = hi - lo
    cdef double t = 0.0, d1, rad, d2, denom
    cdef bint ok = False
    if da * db < 0:
        t = a - da * (b - a) / (db - da)
        ok = True
    else:
        d1 = da + db - 3.0 * (fa - fb) / (a - b)
        rad = d1 * d1 - da * db
        if rad >= 0.0:
            d2 = copysign(sqrt(rad), b - a)
            denom = db - da + 2.0 * d2
            if denom != 0.0:
                t = b - (b - a) * (db + d2 - d1) / denom
                ok = True
    if not ok or not isfinite(t):
        return lo + 0.5 * w
    if t < lo + 0.1 * w:
        t = lo + 0.1 * w
    if t > hi - 0.1 * w:
        t = hi - 0.1 * w
    return t


cdef class _Work:
    """Scratch space for one refinement."""
    cdef double[:, ::1] Y
    cdef double[:, ::1] X
    cdef double[:, ::1] G
    cdef double[::1] A
    cdef double[::1] F
    cdef double[::1] D
    cdef double[::1] d

    def __cinit__(self, Py_ssize_t n):
        self.Y = np.empty((4, n))
        self.X = np.empty((4, n))
        self.G = np.empty((4, n))
        self.A = np.zeros(4)
        self.F = np.zeros(4)
        self.D = np.zeros(4)
        self.d = np.empty(n)


cdef inline int _free_slot(int u, int v) noexcept nogil:
    cdef int k
    for k in range(1, 4):
        if k != u and k != v:
            return k
    return -1


cdef inline bint _phi(Problem* p, _Work w, int k, double a) noexcept:
    cdef Py_ssize_t i
    cdef Py_ssize_t n = p.n
    for i in range(n):
        w.Y[k, i] = w.Y[0, i] + a * w.d[i]
    if not _evaluate(p, &w.Y[k, 0], &w.X[k, 0], &w.G[k, 0], &w.F[k]):
        return False
    w.A[k] = a
    w.D[k] = _dot(&w.G[k, 0], &w.d[0], n)
    return True


cdef int _zoom(Problem* p, _Work w, int lo, int hi, double f0, double dphi0,
               double c1, double c2) noexcept:
    cdef double width, a
    cdef int cur
    while True:
        width = fabs(w.A[hi] - w.A[lo])
        if width <= 1e-14 * max(1.0, fabs(w.A[lo])) or p.evals >= p.max_evals:
            return lo
        a = _interpolate(w.A[lo], w.F[lo], w.D[lo], w.A[hi], w.F[hi], w.D[hi])
        cur = _free_slot(lo, hi)
        if not _phi(p, w, cur, a):
            return lo
        if w.F[cur] > f0 + c1 * a * dphi0 or w.F[cur] >= w.F[lo]:
            hi = cur
        else:
            if fabs(w.D[cur]) <= -c2 * dphi0:
                return cur
            if w.D[cur] * (w.A[hi] - w.A[lo]) >= 0:
                hi = lo
            lo = cur


cdef int _search(Problem* p, _Work w, double c1, double c2, double max_step,
                 double first_step) noexcept:
    """Strong-Wolfe search from slot 0 along ``w.d``; accepted slot or -1."""
    cdef Py_ssize_t n = p.n
    cdef double f0 = w.F[0]
    cdef double dphi0 = w.D[0]
    cdef double alpha_max = max_step / sqrt(_dot(&w.d[0], &w.d[0], n))
    cdef double a = first_step if first_step < alpha_max else alpha_max
    cdef int prev = 0, cur = 1, best
    cdef bint first = True
    w.A[0] = 0.0
    while True:
        if not _phi(p, w, cur, a):
            return prev if w.A[prev] > 0 else -1
        if w.F[cur] > f0 + c1 * a * dphi0 or (not first and w.F[cur] >= w.F[prev]):
            best = _zoom(p, w, prev, cur, f0, dphi0, c1, c2)
            break
        if fabs(w.D[cur]) <= -c2 * dphi0:
            best = cur
            break
        if w.D[cur] >= 0:
            best = _zoom(p, w, cur, prev, f0, dphi0, c1, c2)
            break
        if a >= alpha_max:
            best = cur
            break
        prev = cur
        cur = _free_slot(prev, 0)
        a = 2.0 * a if 2.0 * a < alpha_max else alpha_max
        first = False
    if best == 0 or w.A[best] <= 0 or w.F[best] >= f0:
        return -1
    return best


cdef inline double _max_abs(double[:, ::1] G, Py_ssize_t n) noexcept:
    cdef Py_ssize_t i
    cdef double m = 0.0
    for i in range(n):
        if fabs(G[0, i]) > m:
            m = fabs(G[0, i])
    return m


cdef inline void _identity(double[:, ::1] H, double scale) noexcept:
    cdef Py_ssize_t i, j
    for i in range(H.shape[0]):
        for j in range(H.shape[1]):
            H[i, j] = scale if i == j else 0.0


def refine_sine_rastrigin(y0, delta, lower, upper, int max_iterations, double grad_tolerance,
                          int max_evals, double c1, double c2, double max_step,
                          double initial_step=1.0):
    """BFGS in genotype space; see ``dynhga.kernels.refine_sine_rastrigin``."""
    cdef double[::1] yv0 = np.ascontiguousarray(y0, dtype=np.float64)
    cdef double[::1] dl = np.ascontiguousarray(delta, dtype=np.float64)
    cdef double[::1] lo = np.ascontiguousarray(lower, dtype=np.float64)
    cdef double[::1] hi = np.ascontiguousarray(upper, dtype=np.float64)
    cdef Py_ssize_t n = yv0.shape[0]
    if dl.shape[0] != n or lo.shape[0] != n or hi.shape[0] != n:
        raise ValueError("length mismatch between y0, delta and bounds")
    if max_evals < 1:
        raise ValueError("max_evals must be >= 1")
    cdef double[::1] mid = np.empty(n)
    cdef double[::1] half = np.empty(n)
    cdef double[::1] values = np.empty(max_evals)
    cdef Py_ssize_t i, j
    for i in range(n):
        mid[i] = (lo[i] + hi[i]) / 2.0
        half[i] = (lo[i] - hi[i]) / 2.0

    cdef Problem p
    p.n = n
    p.delta = &dl[0]
    p.mid = &mid[0]
    p.half = &half[0]
    p.lower = &lo[0]
    p.upper = &hi[0]
    p.values = &values[0]
    p.evals = 0
    p.max_evals = max_evals

    cdef _Work w = _Work(n)
    cdef double[:, ::1] H = np.empty((n, n))
    cdef double[::1] s = np.empty(n)
    cdef double[::1] yd = np.empty(n)
    cdef double[::1] Hy = np.empty(n)
    for i in range(n):
        w.Y[0, i] = yv0[i]
    _evaluate(&p, &w.Y[0, 0], &w.X[0, 0], &w.G[0, 0], &w.F[0])

    _identity(H, 1.0)
    cdef bint fresh = True
    cdef int skips = 0
    cdef int iterations = 0
    cdef int b
    cdef double gd, gnorm, first_step, sy, yy, yHy, coef
    while iterations < max_iterations and _max_abs(w.G, n) >= grad_tolerance:
        if p.evals >= p.max_evals:
            break
        for i in range(n):
            gd = 0.0
            for j in range(n):
                gd += H[i, j] * w.G[0, j]
            w.d[i] = -gd
        if not _dot(&w.G[0, 0], &w.d[0], n) < 0:
            _identity(H, 1.0)
            fresh = True
            for i in range(n):
                w.d[i] = -w.G[0, i]
        w.D[0] = _dot(&w.G[0, 0], &w.d[0], n)
        if fresh:
            gnorm = sqrt(_dot(&w.G[0, 0], &w.G[0, 0], n))
            first_step = initial_step / gnorm if initial_step / gnorm < 1.0 else 1.0
        else:
            first_step = 1.0
        b = _search(&p, w, c1, c2, max_step, first_step)
        if b < 0:
            if fresh:
                break
            _identity(H, 1.0)
            fresh = True
            continue
        iterations += 1
        for i in range(n):
            s[i] = w.Y[b, i] - w.Y[0, i]
            yd[i] = w.G[b, i] - w.G[0, i]
        sy = _dot(&s[0], &yd[0], n)
        if sy > CURVATURE_EPS:
            if fresh:
                yy = _dot(&yd[0], &yd[0], n)
                _identity(H, sy / yy)
            for i in range(n):
                gd = 0.0
                for j in range(n):
                    gd += H[i, j] * yd[j]
                Hy[i] = gd
            yHy = _dot(&yd[0], &Hy[0], n)
            coef = (sy + yHy) / (sy * sy)
            for i in range(n):
                for j in range(n):
                    H[i, j] = H[i, j] + coef * s[i] * s[j] - (Hy[i] * s[j] + s[i] * Hy[j]) / sy
            fresh = False
            skips = 0
        else:
            skips += 1
            if skips >= MAX_CURVATURE_SKIPS:
                _identity(H, 1.0)
                fresh = True
                skips = 0
        for i in range(n):
            w.Y[0, i] = w.Y[b, i]
            w.X[0, i] = w.X[b, i]
            w.G[0, i] = w.G[b, i]
        w.F[0] = w.F[b]

    converged = _max_abs(w.G, n) < grad_tolerance
    return (np.asarray(w.Y[0]).copy(), np.asarray(w.X[0]).copy(), float(w.F[0]),
            iterations, int(p.evals), bool(converged), np.asarray(values[:p.evals]).copy())
