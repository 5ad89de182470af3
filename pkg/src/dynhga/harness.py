"""Experiment matrices: configuration, seeded parallel execution and output files."""
from __future__ import annotations

import csv
import hashlib
import io
import itertools
import json
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import baselines
from .errors import ConfigError
from .hga import HgaConfig, run_hga
from .metrics import RunTrace, summarize_runs, summarize_trace
from .objective_env import BoxDomain, DynamicEnvironment, DynamicsKind, DynamicsSpec

ALGORITHMS = ("HGA", "SGA_M", "RI25_M", "HM_M", "ERS")
DYNAMICS = tuple(k.value for k in DynamicsKind)

SUMMARY_COLUMNS = [
    "algo", "dynamics", "dim", "severity", "update_freq", "seed",
    "offline_error", "evals", "changes_seen", "final_best", "offline_error_sd",
]
TRACE_COLUMNS = ["eval_index", "best_since_change", "f_true", "epoch"]
AGGREGATE_SEED = "mean"

DEFAULTS = {
    "severity": 0.1,
    "update_freq": 5000,
    "runs": 20,
    "base_seed": 0,
    "budget": 50_000,
    "report_at": None,
    "bound": 50.0,
    "pop_size": 100,
    "gamma": 25,
}

# JSON key -> (canonical field, takes a list)
_KEYS = {
    "algorithm": ("algorithms", True), "algorithms": ("algorithms", True),
    "algo": ("algorithms", True),
    "dynamics": ("dynamics", True),
    "dim": ("dims", True), "dims": ("dims", True), "dimension": ("dims", True),
    "dimensions": ("dims", True),
    "severity": ("severities", True), "severities": ("severities", True),
    "update_freq": ("update_freqs", True), "update_freqs": ("update_freqs", True),
    "runs": ("runs", False), "base_seed": ("base_seed", False), "seed": ("base_seed", False),
    "budget": ("budget", False), "report_at": ("report_at", False),
    "bound": ("bound", False), "pop_size": ("pop_size", False), "gamma": ("gamma", False),
}


@dataclass(frozen=True)
class ExperimentSpec:
    """One cell of the matrix: an algorithm on one dynamic problem."""

    algorithm: str
    dynamics: DynamicsSpec
    budget: int = 50_000
    report_at: int = 50_000
    runs: int = 20
    base_seed: int = 0
    bound: float = 50.0
    pop_size: int = 100
    output_path: Optional[str] = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError("algorithm", f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}")
        if self.budget < 1:
            raise ConfigError("budget", "must be >= 1")
        if not 1 <= self.report_at <= self.budget:
            raise ConfigError("report_at", f"must lie in [1, budget={self.budget}]")
        if self.runs < 1:
            raise ConfigError("runs", "must be >= 1")
        if not self.bound > 0:
            raise ConfigError("bound", "must be positive")
        if self.pop_size < 2:
            raise ConfigError("pop_size", "must be >= 2")

    @property
    def dimension(self) -> int:
        return self.dynamics.dimension

    def key(self):
        d = self.dynamics
        return (self.algorithm, d.kind.value, d.dimension, d.severity, d.update_freq)

    def problem_key(self):
        """Cell coordinates without the algorithm: shared by every algorithm."""
        return self.key()[1:]


@dataclass(frozen=True)
class MatrixSpec:
    algorithms: tuple
    dynamics: tuple
    dims: tuple
    severities: tuple = (0.1,)
    update_freqs: tuple = (5000,)
    runs: int = 20
    base_seed: int = 0
    budget: int = 50_000
    report_at: Optional[int] = None
    bound: float = 50.0
    pop_size: int = 100
    gamma: int = 25

    def __post_init__(self):
        for name in ("algorithms", "dynamics", "dims", "severities", "update_freqs"):
            if len(getattr(self, name)) == 0:
                raise ConfigError(name, "must not be empty")
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise ConfigError("algorithms", f"unknown algorithm {a!r}; expected one of {ALGORITHMS}")
        for k in self.dynamics:
            if k not in DYNAMICS:
                raise ConfigError("dynamics", f"unknown dynamics {k!r}; expected one of {DYNAMICS}")
        for n in self.dims:
            if not isinstance(n, int) or n < 1:
                raise ConfigError("dims", f"dimension must be a positive integer, got {n!r}")
        for s in self.severities:
            if not (isinstance(s, (int, float)) and math.isfinite(s) and s >= 0):
                raise ConfigError("severities", f"severity must be a finite number >= 0, got {s!r}")
        for g in self.update_freqs:
            if not isinstance(g, int) or g < 1:
                raise ConfigError("update_freqs", f"update frequency must be a positive integer, got {g!r}")
        if not isinstance(self.runs, int) or self.runs < 1:
            raise ConfigError("runs", "must be a positive integer")
        if not isinstance(self.budget, int) or self.budget < 1:
            raise ConfigError("budget", "must be a positive integer")
        if self.report_at is not None and not (isinstance(self.report_at, int) and 1 <= self.report_at <= self.budget):
            raise ConfigError("report_at", f"must be an integer in [1, budget={self.budget}]")
        if not isinstance(self.base_seed, int):
            raise ConfigError("base_seed", "must be an integer")
        if not (isinstance(self.bound, (int, float)) and self.bound > 0):
            raise ConfigError("bound", "must be positive")
        if not isinstance(self.pop_size, int) or self.pop_size < 2:
            raise ConfigError("pop_size", "must be an integer >= 2")
        if not isinstance(self.gamma, int) or self.gamma < 1:
            raise ConfigError("gamma", "must be a positive integer")

    @property
    def report(self) -> int:
        return self.budget if self.report_at is None else self.report_at

    def cells(self) -> list:
        """Every cell, in canonical order."""
        out = []
        for algo, kind, n, s, g in itertools.product(
                self.algorithms, self.dynamics, self.dims, self.severities, self.update_freqs):
            dyn = DynamicsSpec(DynamicsKind.parse(kind), float(s), int(g), int(n), gamma=self.gamma)
            out.append(ExperimentSpec(algo, dyn, self.budget, self.report, self.runs,
                                      self.base_seed, float(self.bound), self.pop_size))
        return sorted(out, key=cell_sort_key)

    def to_dict(self) -> dict:
        return {
            "algorithms": list(self.algorithms),
            "dynamics": list(self.dynamics),
            "dims": list(self.dims),
            "severities": list(self.severities),
            "update_freqs": list(self.update_freqs),
            "runs": self.runs,
            "base_seed": self.base_seed,
            "budget": self.budget,
            "report_at": self.report_at,
            "bound": self.bound,
            "pop_size": self.pop_size,
            "gamma": self.gamma,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def cell_sort_key(cell: ExperimentSpec):
    a, k, n, s, g = cell.key()
    return (ALGORITHMS.index(a), DYNAMICS.index(k), n, s, g)


def _as_list(value):
    return list(value) if isinstance(value, (list, tuple)) else [value]


def parse_config(text: str) -> MatrixSpec:
    """Build a :class:`MatrixSpec` from a JSON document.

    List-valued fields accept a single value or a list, under either the
    singular or plural key (``dim``/``dims``). Missing fields take the
    defaults in :data:`DEFAULTS`.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<document>", f"not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("<document>", "top level must be an object")
    fields = {}
    for key, value in doc.items():
        if key not in _KEYS:
            raise ConfigError(key, "unknown key")
        name, is_list = _KEYS[key]
        if name in fields:
            raise ConfigError(key, f"duplicates {name!r}")
        fields[name] = _as_list(value) if is_list else value
    for name in ("algorithms", "dynamics", "dims"):
        if name not in fields:
            raise ConfigError(name, "is required")
    fields["algorithms"] = [_canonical_algo(a) for a in fields["algorithms"]]
    fields["dynamics"] = [_canonical_kind(k) for k in fields["dynamics"]]
    fields.setdefault("severities", [DEFAULTS["severity"]])
    fields.setdefault("update_freqs", [DEFAULTS["update_freq"]])
    for name in ("runs", "base_seed", "budget", "report_at", "bound", "pop_size", "gamma"):
        fields.setdefault(name, DEFAULTS[name])
    for name in ("algorithms", "dynamics", "dims", "severities", "update_freqs"):
        fields[name] = tuple(fields[name])
    for name in ("dims", "update_freqs"):
        fields[name] = tuple(_integral(v, name) for v in fields[name])
    for name in ("runs", "budget", "pop_size", "gamma", "base_seed"):
        fields[name] = _integral(fields[name], name)
    if fields["report_at"] is not None:
        fields["report_at"] = _integral(fields["report_at"], "report_at")
    for s in fields["severities"]:
        if isinstance(s, bool) or not isinstance(s, (int, float)):
            raise ConfigError("severities", f"expected a number, got {s!r}")
    fields["severities"] = tuple(float(s) for s in fields["severities"])
    if isinstance(fields["bound"], bool) or not isinstance(fields["bound"], (int, float)):
        raise ConfigError("bound", "expected a number")
    fields["bound"] = float(fields["bound"])
    return MatrixSpec(**fields)


def _integral(v, name):
    if isinstance(v, bool):
        raise ConfigError(name, f"expected an integer, got {v!r}")
    if isinstance(v, float) and v.is_integer():
        return int(v)
    if not isinstance(v, int):
        raise ConfigError(name, f"expected an integer, got {v!r}")
    return v


def _canonical_algo(a) -> str:
    if not isinstance(a, str):
        raise ConfigError("algorithms", f"expected a name, got {a!r}")
    key = a.upper().replace("/", "_").replace("-", "_")
    if key not in ALGORITHMS:
        raise ConfigError("algorithms", f"unknown algorithm {a!r}; expected one of {ALGORITHMS}")
    return key


def _canonical_kind(k) -> str:
    try:
        return DynamicsKind.parse(k).value
    except Exception:
        raise ConfigError("dynamics", f"unknown dynamics {k!r}; expected one of {DYNAMICS}") from None


# ------------------------------------------------------------------ seeding

def stable_hash(*parts) -> int:
    """64-bit hash of ``parts`` that does not depend on the interpreter session."""
    text = "|".join(repr(p) for p in parts).encode()
    return int.from_bytes(hashlib.blake2b(text, digest_size=8).digest(), "little")


def run_seed(cell: ExperimentSpec, run: int) -> int:
    """Seed for the algorithm's own randomness."""
    return (cell.base_seed + stable_hash("algo", cell.key(), run)) % 2**63


def env_seed(cell: ExperimentSpec, run: int) -> int:
    """Seed for the environment; excludes the algorithm so all of them face the same offsets."""
    return (cell.base_seed + stable_hash("env", cell.problem_key(), run)) % 2**63


# ---------------------------------------------------------------- execution

def run_algorithm(algorithm: str, env: DynamicEnvironment, domain: BoxDomain, seed: int,
                  pop_size: int = 100) -> RunTrace:
    if algorithm == "HGA":
        return run_hga(env, domain, HgaConfig(pop_size=pop_size, seed=seed))
    # immigrants are capped so small test populations stay valid
    cfg = baselines.BaselineConfig(pop_size=pop_size, immigrants_count=min(25, pop_size), seed=seed)
    runner = {
        "SGA_M": baselines.run_sga_m,
        "RI25_M": baselines.run_ri_m,
        "HM_M": baselines.run_hm_m,
        "ERS": baselines.run_ers,
    }[algorithm]
    return runner(env, domain, cfg)


def run_single(cell: ExperimentSpec, run: int, keep_trace: bool = False):
    """Execute one run; returns ``(RunSummary, trace or None)``."""
    seed = run_seed(cell, run)
    env = DynamicEnvironment(cell.dynamics, seed=env_seed(cell, run), budget=cell.budget, trace=RunTrace())
    domain = BoxDomain.symmetric(cell.dimension, cell.bound)
    trace = run_algorithm(cell.algorithm, env, domain, seed, cell.pop_size)
    summary = summarize_trace(trace, seed, cell.report_at)
    return summary, (trace if keep_trace else None)


@dataclass
class CellResult:
    cell: ExperimentSpec
    summaries: list = field(default_factory=list)
    failures: list = field(default_factory=list)  # (run index, message)
    trace: Optional[RunTrace] = None  # first run, when requested


def _task(args):
    cell, run, keep = args
    try:
        summary, trace = run_single(cell, run, keep)
        return run, summary, trace, None
    except Exception as exc:  # recorded per cell, never aborts the matrix
        return run, None, None, f"{type(exc).__name__}: {exc}"


def run_cells(cells, parallelism: int = 1, keep_first_trace: bool = False) -> list:
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    tasks = [(c, r, keep_first_trace and r == 0) for c in cells for r in range(c.runs)]
    if parallelism == 1:
        outcomes = [_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            outcomes = list(pool.map(_task, tasks, chunksize=1))
    results = []
    it = iter(outcomes)
    for c in cells:
        res = CellResult(c)
        for _ in range(c.runs):
            run, summary, trace, err = next(it)
            if err is not None:
                res.failures.append((run, err))
            else:
                res.summaries.append(summary)
                if trace is not None:
                    res.trace = trace
        results.append(res)
    return results


def run_matrix(spec: MatrixSpec, parallelism: int = 1) -> list:
    """Run every cell of ``spec``; results come back in canonical cell order."""
    return run_cells(spec.cells(), parallelism)


# ------------------------------------------------------------------ outputs

def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def summary_rows(results) -> list:
    """Run rows plus one aggregate row per cell, as lists of strings."""
    rows = []
    for res in results:
        a, k, n, s, g = res.cell.key()
        head = [a, k, str(n), _fmt(float(s)), str(g)]
        runs = res.summaries
        for r in runs:
            rows.append(head + [str(r.seed), _fmt(r.offline_error), str(r.evals),
                                str(r.changes_seen), _fmt(r.final_best), ""])
        if runs:
            mean, sd, _, _ = summarize_runs([r.offline_error for r in runs])
            m = len(runs)
            rows.append(head + [
                AGGREGATE_SEED, _fmt(mean), _fmt(sum(r.evals for r in runs) / m),
                _fmt(sum(r.changes_seen for r in runs) / m),
                _fmt(sum(r.final_best for r in runs) / m), _fmt(sd),
            ])
    return rows


def _atomic_write(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def summary_csv_text(results) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    w.writerows(summary_rows(results))
    return buf.getvalue()


def emit_summary(results, path, table_path=None) -> None:
    """Write the summary CSV and, next to it, the rendered plain-text table."""
    _atomic_write(path, summary_csv_text(results))
    if table_path is None:
        table_path = Path(path).with_suffix(".txt")
    if table_path:
        _atomic_write(table_path, render_table(aggregate_rows(read_summary_text(summary_csv_text(results)))))


def read_summary_text(text: str) -> list:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or list(reader.fieldnames)[:len(SUMMARY_COLUMNS)] != SUMMARY_COLUMNS:
        raise ValueError(f"not a summary CSV: header {reader.fieldnames}")
    return list(reader)


def read_summary(path) -> list:
    with open(path, newline="") as fh:
        return read_summary_text(fh.read())


def aggregate_rows(rows) -> list:
    return [r for r in rows if r["seed"] == AGGREGATE_SEED]


def render_table(agg_rows) -> str:
    """Aligned table: one line per (dynamics, dim, severity, update_freq), one column per algorithm."""
    if not agg_rows:
        return "(no results)\n"
    algos = [a for a in ALGORITHMS if any(r["algo"] == a for r in agg_rows)]
    cells = {}
    params = []
    for r in agg_rows:
        p = (r["dynamics"], int(r["dim"]), float(r["severity"]), int(r["update_freq"]))
        if p not in cells:
            cells[p] = {}
            params.append(p)
        sd = r.get("offline_error_sd") or "0"
        cells[p][r["algo"]] = f"{float(r['offline_error']):.2f} ({float(sd):.2f})"
    params.sort(key=lambda p: (DYNAMICS.index(p[0]) if p[0] in DYNAMICS else 99,) + p[1:])
    header = ["dynamics", "n", "s", "dg"] + algos
    lines = [[p[0], str(p[1]), f"{p[2]:g}", str(p[3])] + [cells[p].get(a, "-") for a in algos]
             for p in params]
    widths = [max(len(x) for x in col) for col in zip(header, *lines)]

    def fmt(row):
        return "  ".join(x.ljust(w) if i < 4 else x.rjust(w) for i, (x, w) in enumerate(zip(row, widths)))

    out = [fmt(header), "  ".join("-" * w for w in widths)]
    prev = None
    for p, line in zip(params, lines):
        if prev is not None and p[0] != prev:
            out.append("")
        out.append(fmt(line))
        prev = p[0]
    return "\n".join(out) + "\n"


def plotdata_indices(epochs, stride: int) -> list:
    """0-based positions kept by :func:`emit_trace_plotdata`."""
    if stride < 1:
        raise ValueError("stride must be >= 1")
    keep = []
    prev = None
    for i, e in enumerate(epochs):
        if (i + 1) % stride == 0 or e != prev:
            keep.append(i)
        prev = e
    return keep


def emit_trace_plotdata(trace: RunTrace, path, stride: int) -> None:
    """Down-sampled trace: every ``stride``-th record plus the first record of every epoch."""
    idx = plotdata_indices(trace.epochs, stride)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    for i in idx:
        w.writerow([i + 1, repr(float(trace.best_since_change[i])), repr(float(trace.f_true[i])),
                    trace.epochs[i]])
    _atomic_write(path, buf.getvalue())
