"""Latency percentile and forecasting-overhead reports."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

PERCENTILES = ("90", "95", "99", "99.5", "99.9")


class EmptyInput(ValueError):
    pass


@dataclass(frozen=True)
class ReportRow:
    statistic: str
    value: float  # ms


def nearest_rank(sorted_values: Sequence[float], percentile: str | float) -> float:
    """Smallest value with at least ``percentile`` percent of the data at or below it."""
    n = len(sorted_values)
    if n == 0:
        raise EmptyInput("no values")
    # exact rational arithmetic: 0.9 * 100 must give rank 90, not 91
    rank = math.ceil(Fraction(str(percentile)) * n / 100)
    return float(sorted_values[max(rank, 1) - 1])


def _response_times(records) -> np.ndarray:
    if hasattr(records, "response_ms"):  # ResponseLog
        return np.asarray(records.response_ms, dtype=float)
    if isinstance(records, np.ndarray):
        return records.astype(float)
    items = list(records)
    if items and hasattr(items[0], "response_ms"):
        return np.array([r.response_ms for r in items], dtype=float)
    return np.asarray(items, dtype=float)


def percentile_report(records: Iterable) -> list[ReportRow]:
    """Mean and nearest-rank percentiles of response times in ms.

    Accepts a ``ResponseLog``, a sequence of ``ResponseRecord`` or plain
    millisecond values.
    """
    values = np.sort(_response_times(records))
    if values.size == 0:
        raise EmptyInput("no response records in the reported window")
    rows = [ReportRow("avg", float(np.mean(values)))]
    rows += [ReportRow(f"p{p}", nearest_rank(values, p)) for p in PERCENTILES]
    return rows


@dataclass(frozen=True)
class ActivationTiming:
    fetch_ms: float
    forecast_ms: float
    write_ms: float

    @property
    def total_ms(self) -> float:
        return self.fetch_ms + self.forecast_ms + self.write_ms


@dataclass(frozen=True)
class OverheadReport:
    forecasting_ms: float
    total_ms: float
    activations: int


def overhead_report(timings: Sequence[ActivationTiming]) -> OverheadReport:
    if not timings:
        raise EmptyInput("no forecaster activations recorded")
    n = len(timings)
    return OverheadReport(
        forecasting_ms=math.fsum(t.forecast_ms for t in timings) / n,
        total_ms=math.fsum(t.total_ms for t in timings) / n,
        activations=n,
    )


def write_percentiles(path: str | Path, columns: dict[str, list[ReportRow]]) -> None:
    """One row per statistic, one column per reported window."""
    names = list(columns)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["statistic"] + [f"{n}_ms" for n in names])
        stats = [r.statistic for r in next(iter(columns.values()))]
        for k, stat in enumerate(stats):
            w.writerow([stat] + [f"{columns[n][k].value:.6f}" for n in names])


def read_percentiles(path: str | Path) -> dict[str, dict[str, float]]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {r["statistic"]: {k: float(v) for k, v in r.items() if k != "statistic"} for r in rows}


def write_overhead(path: str | Path, report: OverheadReport, model: str) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["model", "forecasting_time_ms", "total_time_ms", "activations"])
        w.writerow([model, f"{report.forecasting_ms:.6f}", f"{report.total_ms:.6f}", report.activations])


def format_table(headers: Sequence[str], rows: Sequence[Sequence[object]]) -> str:
    cells = [[str(h) for h in headers]] + [[c if isinstance(c, str) else f"{c:.2f}" for c in r] for r in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(headers))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)
