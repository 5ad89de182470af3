"""Time the refinement kernel under both backends.

    python benchmarks/bench_kernels.py --calls 2000 --dim 5

Runs identical random refinements through the compiled extension and the
pure-Python fallback, checks the outputs agree, and reports calls per second.
"""
import argparse
import time

import numpy as np

from dynhga import _kernels_py
from dynhga.hga import refinement_config
from dynhga.kernels import refine_sine_rastrigin
from dynhga.local_search import LsConfig
from dynhga.objective_env import BoxDomain

try:
    from dynhga import _kernels as _compiled
except ImportError:
    _compiled = None


def _cases(n_calls, dim, seed):
    rng = np.random.default_rng(seed)
    ys = rng.uniform(-np.pi / 2, np.pi / 2, size=(n_calls, dim))
    deltas = rng.normal(0.0, 1.0, size=(n_calls, dim))
    return ys, deltas


def time_backend(impl, ys, deltas, domain, ls, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = [refine_sine_rastrigin(y, d, domain, ls, impl=impl) for y, d in zip(ys, deltas)]
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--calls", type=int, default=2000)
    ap.add_argument("--dim", type=int, default=5)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--config", choices=["refine", "long"], default="refine",
                    help="refine: HGA default; long: 40+2n evaluation budget")
    args = ap.parse_args(argv)

    domain = BoxDomain.symmetric(args.dim)
    ls = refinement_config(args.dim) if args.config == "refine" else LsConfig.for_dimension(args.dim)
    ys, deltas = _cases(args.calls, args.dim, args.seed)

    t_py, out_py = time_backend(_kernels_py, ys, deltas, domain, ls, args.repeat)
    print(f"python  : {t_py:8.3f} s  {args.calls / t_py:10.0f} calls/s")
    if _compiled is None:
        print("cython  : extension not built")
        return 0
    t_cy, out_cy = time_backend(_compiled, ys, deltas, domain, ls, args.repeat)
    print(f"cython  : {t_cy:8.3f} s  {args.calls / t_cy:10.0f} calls/s")
    print(f"speedup : {t_py / t_cy:8.1f}x")
    mismatches = sum(
        1 for a, b in zip(out_py, out_cy)
        if not (np.array_equal(a.y, b.y) and a.f == b.f and np.array_equal(a.values, b.values))
    )
    print(f"mismatches: {mismatches} / {args.calls}")
    return 1 if mismatches else 0


if __name__ == "__main__":
    raise SystemExit(main())
