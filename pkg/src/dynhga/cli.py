"""Command-line entry point: ``dynhga run | matrix | table``.

Exit status is 0 on success, 1 when some runs failed, 2 on configuration
errors.
"""
from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from . import harness
from .errors import ConfigError, InvalidInputError
from .objective_env import offset_trajectory, write_offset_csv

EXIT_OK, EXIT_PARTIAL, EXIT_CONFIG = 0, 1, 2


def _add_run_options(p):
    p.add_argument("--algo", default="HGA", help="one of " + ", ".join(harness.ALGORITHMS))
    p.add_argument("--dynamics", default="linear", choices=harness.DYNAMICS)
    p.add_argument("--dim", type=int, default=5)
    p.add_argument("--severity", type=float, default=harness.DEFAULTS["severity"])
    p.add_argument("--update-freq", type=int, default=harness.DEFAULTS["update_freq"])
    p.add_argument("--budget", type=int, default=harness.DEFAULTS["budget"])
    p.add_argument("--report-at", type=int, default=None, help="evaluation index for reporting (default: budget)")
    p.add_argument("--runs", type=int, default=harness.DEFAULTS["runs"])
    p.add_argument("--seed", type=int, default=0, help="base seed")
    p.add_argument("--pop-size", type=int, default=harness.DEFAULTS["pop_size"])
    p.add_argument("--out", default="summary.csv", help="summary CSV path")
    p.add_argument("--parallelism", type=int, default=1)
    p.add_argument("--trace-out", default=None, help="write the first run's down-sampled trace here")
    p.add_argument("--stride", type=int, default=100, help="trace down-sampling stride")
    p.add_argument("--offsets-out", default=None, help="write the first run's offset trajectory here")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dynhga", description="Hybrid GA on dynamic Rastrigin benchmarks")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a single cell")
    _add_run_options(run)

    mat = sub.add_parser("matrix", help="run every cell of a JSON config")
    mat.add_argument("config", help="JSON matrix configuration")
    mat.add_argument("--out", default="summary.csv")
    mat.add_argument("--parallelism", type=int, default=1)
    mat.add_argument("--runs", type=int, default=None, help="override the config's runs")
    mat.add_argument("--seed", type=int, default=None, help="override the config's base seed")
    mat.add_argument("--budget", type=int, default=None)
    mat.add_argument("--report-at", type=int, default=None)

    tab = sub.add_parser("table", help="render a summary CSV as a plain-text table")
    tab.add_argument("summary", help="summary CSV written by run or matrix")
    tab.add_argument("--out", default=None, help="write the table here instead of stdout")
    return parser


def _report(results, out) -> int:
    harness.emit_summary(results, out)
    failed = 0
    for res in results:
        for run, msg in res.failures:
            failed += 1
            print(f"run {run} of {res.cell.key()} failed: {msg}", file=sys.stderr)
    print(harness.render_table(harness.aggregate_rows(harness.read_summary(out))), end="")
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_run(args) -> int:
    algo = harness._canonical_algo(args.algo)
    spec = harness.MatrixSpec(
        algorithms=(algo,), dynamics=(args.dynamics,), dims=(args.dim,),
        severities=(args.severity,), update_freqs=(args.update_freq,),
        runs=args.runs, base_seed=args.seed, budget=args.budget, report_at=args.report_at,
        pop_size=args.pop_size,
    )
    if args.parallelism < 1:
        raise ConfigError("parallelism", "must be >= 1")
    if args.stride < 1:
        raise ConfigError("stride", "must be >= 1")
    cells = spec.cells()
    results = harness.run_cells(cells, args.parallelism, keep_first_trace=args.trace_out is not None)
    if args.trace_out is not None and results[0].trace is not None:
        harness.emit_trace_plotdata(results[0].trace, args.trace_out, args.stride)
    if args.offsets_out is not None:
        cell = cells[0]
        traj = offset_trajectory(cell.dynamics, cell.budget // cell.dynamics.update_freq,
                                 seed=harness.env_seed(cell, 0))
        write_offset_csv(args.offsets_out, traj)
    return _report(results, args.out)


def cmd_matrix(args) -> int:
    spec = harness.parse_config(Path(args.config).read_text())
    overrides = {}
    if args.runs is not None:
        overrides["runs"] = args.runs
    if args.seed is not None:
        overrides["base_seed"] = args.seed
    if args.budget is not None:
        overrides["budget"] = args.budget
    if args.report_at is not None:
        overrides["report_at"] = args.report_at
    if overrides:
        spec = dataclasses.replace(spec, **overrides)
    if args.parallelism < 1:
        raise ConfigError("parallelism", "must be >= 1")
    return _report(harness.run_matrix(spec, args.parallelism), args.out)


def cmd_table(args) -> int:
    text = harness.render_table(harness.aggregate_rows(harness.read_summary(args.summary)))
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text, end="")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"run": cmd_run, "matrix": cmd_matrix, "table": cmd_table}[args.command]
    try:
        return handler(args)
    except (ConfigError, InvalidInputError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
