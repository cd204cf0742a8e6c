"""In-memory metric store.

Series are identified by a metric name plus a set of string dimensions
(``cpu.percent{instance_id=vm-01}``). Timestamps are integer seconds since the
scenario epoch and must be strictly increasing within a series.
"""

from __future__ import annotations

import bisect
import csv
import math
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping


class MetricStoreError(Exception):
    pass


class OutOfOrderTimestamp(MetricStoreError, ValueError):
    pass


class InvalidValue(MetricStoreError, ValueError):
    pass


class UnknownSeries(MetricStoreError, KeyError):
    pass


@dataclass(frozen=True, order=True)
class SeriesKey:
    metric_name: str
    dimensions: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        names = [k for k, _ in self.dimensions]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate dimension key in {self.dimensions!r}")
        # canonical order so that {a, b} and {b, a} hash the same
        object.__setattr__(self, "dimensions", tuple(sorted(self.dimensions)))

    @classmethod
    def of(cls, metric_name: str, dimensions: Mapping[str, str] | None = None, **dims: str) -> "SeriesKey":
        merged = dict(dimensions or {})
        merged.update(dims)
        return cls(metric_name, tuple((str(k), str(v)) for k, v in merged.items()))

    def dim(self, name: str, default: str | None = None) -> str | None:
        for k, v in self.dimensions:
            if k == name:
                return v
        return default

    def __str__(self) -> str:
        if not self.dimensions:
            return self.metric_name
        inner = ",".join(f"{k}={v}" for k, v in self.dimensions)
        return f"{self.metric_name}{{{inner}}}"


@dataclass(frozen=True)
class MetricPoint:
    timestamp: int
    value: float


@dataclass
class TimeSeries:
    key: SeriesKey
    points: list[MetricPoint] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def timestamps(self) -> list[int]:
        return [p.timestamp for p in self.points]

    @property
    def values(self) -> list[float]:
        return [p.value for p in self.points]

    def last(self) -> MetricPoint | None:
        return self.points[-1] if self.points else None


class _Series:
    __slots__ = ("ts", "vals")

    def __init__(self):
        self.ts: list[int] = []
        self.vals: list[float] = []


class MetricStore:
    """Thread-safe append-only store of time series.

    A single lock guards all series, so a reader never sees a half-applied
    ingest. Retention is unbounded.
    """

    def __init__(self):
        self._series: dict[SeriesKey, _Series] = {}
        self._lock = threading.RLock()

    def ingest(self, key: SeriesKey, point: MetricPoint) -> None:
        value = float(point.value)
        if not math.isfinite(value):
            raise InvalidValue(f"{key}: non-finite value {point.value!r} at t={point.timestamp}")
        ts = int(point.timestamp)
        if ts < 0:
            raise InvalidValue(f"{key}: negative timestamp {ts}")
        with self._lock:
            series = self._series.get(key)
            if series is None:
                series = self._series[key] = _Series()
            if series.ts and ts <= series.ts[-1]:
                raise OutOfOrderTimestamp(
                    f"{key}: timestamp {ts} not after last stored {series.ts[-1]}"
                )
            series.ts.append(ts)
            series.vals.append(value)

    def put(self, key: SeriesKey, timestamp: int, value: float) -> None:
        self.ingest(key, MetricPoint(int(timestamp), value))

    def keys(self, metric_name: str | None = None) -> list[SeriesKey]:
        with self._lock:
            ks = [k for k in self._series if metric_name is None or k.metric_name == metric_name]
        return sorted(ks)

    def __contains__(self, key: SeriesKey) -> bool:
        with self._lock:
            return key in self._series

    def _get(self, key: SeriesKey) -> _Series:
        try:
            return self._series[key]
        except KeyError:
            raise UnknownSeries(str(key)) from None

    def query(self, key: SeriesKey, t_start: int, t_end: int) -> TimeSeries:
        """Return the points of ``key`` with ``t_start <= timestamp <= t_end``."""
        if t_start > t_end:
            raise ValueError(f"empty window [{t_start}, {t_end}]")
        with self._lock:
            series = self._get(key)
            lo = bisect.bisect_left(series.ts, t_start)
            hi = bisect.bisect_right(series.ts, t_end)
            points = [MetricPoint(t, v) for t, v in zip(series.ts[lo:hi], series.vals[lo:hi])]
        return TimeSeries(key, points)

    def latest(self, key: SeriesKey) -> MetricPoint | None:
        with self._lock:
            series = self._get(key)
            if not series.ts:
                return None
            return MetricPoint(series.ts[-1], series.vals[-1])

    def aggregate_sum(
        self,
        keys: Iterable[SeriesKey],
        t_start: int,
        t_end: int,
        alignment_step: int,
        metric_name: str | None = None,
    ) -> TimeSeries:
        """Sum several series on aligned buckets.

        Buckets are stamped at multiples of ``alignment_step`` inside
        ``[t_start, t_end]``; the bucket stamped ``b`` covers ``(b - step, b]``.
        Each series contributes its latest sample in the bucket, or its last
        earlier sample when the bucket is empty. A series contributes nothing
        to buckets that precede its first sample, and buckets no series
        reaches are left out.
        """
        if alignment_step <= 0:
            raise ValueError("alignment_step must be positive")
        if t_start > t_end:
            raise ValueError(f"empty window [{t_start}, {t_end}]")
        keys = sorted(set(keys))
        names = {k.metric_name for k in keys}
        if len(names) > 1:
            raise ValueError(f"cannot sum different metrics: {sorted(names)}")
        out_name = metric_name or (f"{keys[0].metric_name}.sum" if keys else "sum")
        first = -(-t_start // alignment_step) * alignment_step
        buckets = range(first, t_end + 1, alignment_step)
        with self._lock:
            snapshot = [self._get(k) for k in keys]
            points = []
            for b in buckets:
                total = 0.0
                seen = False
                for series in snapshot:
                    i = bisect.bisect_right(series.ts, b)
                    if i == 0:
                        continue
                    total += series.vals[i - 1]
                    seen = True
                if seen:
                    points.append(MetricPoint(b, total))
        return TimeSeries(SeriesKey(out_name), points)

    def to_csv(self, key: SeriesKey, path: str | Path) -> None:
        with self._lock:
            series = self._get(key)
            rows = list(zip(series.ts, series.vals))
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["timestamp", "value"])
            for t, v in rows:
                w.writerow([t, repr(v)])
