"""Parameter sweeps over a base scenario, with per-row error capture."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .engine import run
from .report import SUMMARY_FIELDS, RunSummary
from .scenario import KEYS, Scenario, ScenarioValidationError


@dataclass(frozen=True)
class SweepRow:
    value: float
    summary: RunSummary | None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def _run_one(args):
    base, axis, value, window = args
    try:
        scenario = base.with_value(axis, value)
        _, summary = run(scenario, window)
        return SweepRow(value, summary)
    except Exception as exc:  # recorded in the row, the sweep goes on
        return SweepRow(value, None, f"{type(exc).__name__}: {exc}")


def sweep(base: Scenario, axis: str, values, workers: int = 1, window=None) -> list[SweepRow]:
    """One run per value of ``axis`` (a dotted scenario key), in input order."""
    values = list(values)
    if not values:
        raise ValueError("values must be nonempty")
    if axis not in KEYS:
        raise ScenarioValidationError(f"unknown sweep axis {axis!r}")
    if axis.startswith("features."):
        raise ScenarioValidationError(f"sweep axis {axis!r} is not numeric")
    jobs = [(base, axis, v, window) for v in values]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_one, jobs))
    return [_run_one(j) for j in jobs]


def write_sweep_csv(rows, axis: str, path) -> None:
    with open(Path(path), "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow([axis, *SUMMARY_FIELDS, "error"])
        for r in rows:
            cells = [repr(float(r.value))]
            d = r.summary.as_row() if r.summary is not None else {}
            for f in SUMMARY_FIELDS:
                v = d.get(f)
                cells.append("" if v is None else (repr(float(v)) if isinstance(v, float) else str(v)))
            cells.append(r.error or "")
            wr.writerow(cells)


def find_threshold(base: Scenario, axis: str, lo: float, hi: float, succeeds,
                   tol: float = 0.01) -> float:
    """Smallest value of ``axis`` in [lo, hi] for which ``succeeds(summary)`` holds,
    located by bisection to ``tol``; assumes success is monotone in the value."""
    def ok(v):
        row = _run_one((base, axis, v, None))
        return row.ok and bool(succeeds(row.summary))

    if ok(lo):
        return lo
    if not ok(hi):
        return math.inf
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi
