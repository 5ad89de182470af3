"""Offline error and per-evaluation run traces."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, InvalidInputError


class RunTrace:
    """Per-evaluation record of one run.

    For every evaluation the trace keeps the raw objective value, the best
    value seen since the most recent environment change, the true optimum
    value and the epoch the evaluation belonged to.
    """

    def __init__(self):
        self.values = []
        self.best_since_change = []
        self.f_true = []
        self.epochs = []
        self.change_events = []
        self._best = math.inf
        self._epoch = None

    def __len__(self):
        return len(self.values)

    @property
    def total_evals(self) -> int:
        return len(self.values)

    def append(self, value: float, eval_index: int, epoch: int, f_true: float) -> None:
        if eval_index != len(self.values) + 1:
            raise ContractViolation(
                f"out-of-order evaluation: got index {eval_index}, expected {len(self.values) + 1}"
            )
        if epoch != self._epoch:
            self._epoch = epoch
            self._best = value
        elif value < self._best:
            self._best = value
        self.values.append(value)
        self.best_since_change.append(self._best)
        self.f_true.append(f_true)
        self.epochs.append(epoch)

    @property
    def records(self):
        """``(eval_index, best_since_change, f_true, epoch)`` tuples."""
        return [
            (i + 1, b, f, e)
            for i, (b, f, e) in enumerate(zip(self.best_since_change, self.f_true, self.epochs))
        ]

    def mark_change(self, eval_index: int) -> None:
        """Note that the environment changed right after evaluation ``eval_index``."""
        self.change_events.append(eval_index)

    def changes_seen(self, upto=None) -> int:
        if upto is None:
            return len(self.change_events)
        return sum(1 for k in self.change_events if k <= upto)

    def final_best(self, upto=None) -> float:
        best = self.best_since_change if upto is None else self.best_since_change[:upto]
        if not best:
            raise InvalidInputError("empty trace")
        return best[-1]


def record_evaluation(trace: RunTrace, value: float, env) -> None:
    """Append one evaluation of ``env`` to ``trace``.

    Must be called before the environment's clock advances past it, i.e. with
    ``env.clock.t`` equal to the number of evaluations already recorded.
    """
    _, f_true = env.true_optimum()
    trace.append(float(value), env.clock.t + 1, env.clock.epoch, f_true)


def offline_error(trace: RunTrace, upto=None) -> float:
    """Mean of ``best_since_change - f_true`` over the first ``upto`` evaluations."""
    n = len(trace) if upto is None else min(upto, len(trace))
    if n < 1:
        raise InvalidInputError("offline error of an empty trace")
    best = np.asarray(trace.best_since_change[:n])
    f_true = np.asarray(trace.f_true[:n])
    return float(np.mean(best - f_true))


@dataclass(frozen=True)
class RunSummary:
    offline_error: float
    evals: int
    changes_seen: int
    final_best: float
    seed: int


def summarize_trace(trace: RunTrace, seed: int, report_at=None) -> RunSummary:
    n = len(trace) if report_at is None else min(report_at, len(trace))
    return RunSummary(
        offline_error=offline_error(trace, n),
        evals=n,
        changes_seen=trace.changes_seen(n),
        final_best=trace.final_best(n),
        seed=seed,
    )


def summarize_runs(errors):
    """Mean, sample standard deviation (n-1), min and max of per-run errors."""
    arr = np.asarray(list(errors), dtype=float)
    if arr.size == 0:
        raise InvalidInputError("cannot summarize an empty list of runs")
    sd = float(np.std(arr, ddof=1)) if arr.size > 1 else 0.0
    return float(np.mean(arr)), sd, float(np.min(arr)), float(np.max(arr))
