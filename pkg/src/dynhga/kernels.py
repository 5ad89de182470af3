"""Hot-loop kernels, compiled when available.

The Cython extension ``_kernels`` is used if it imports; otherwise the
pure-Python ``_kernels_py`` takes over. Setting ``DYNHGA_PURE_PYTHON=1``
forces the fallback.
"""
import os
from typing import NamedTuple

import numpy as np

from . import _kernels_py

if os.environ.get("DYNHGA_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"


class Refinement(NamedTuple):
    y: np.ndarray
    x: np.ndarray
    f: float
    iterations: int
    evals: int
    converged: bool
    values: np.ndarray


def refine_sine_rastrigin(y0, delta, domain, ls, max_evals=None, impl=None) -> Refinement:
    """BFGS from genotype ``y0`` on ``rastrigin(transform(y) - delta)``.

    ``values`` lists every objective value computed, in order, so the caller
    can charge them to the environment clock.
    """
    impl = _impl if impl is None else impl
    budget = ls.eval_budget if max_evals is None else max_evals
    return Refinement(*impl.refine_sine_rastrigin(
        y0, delta, domain.lower, domain.upper, ls.max_iterations, ls.grad_tolerance,
        budget, ls.wolfe_c1, ls.wolfe_c2, ls.max_step, ls.initial_step))
