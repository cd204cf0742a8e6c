"""Per-minute request-rate traces.

A trace file holds one decimal rate (requests per second, per client
thread) per line; each rate is held for one segment, 60 s by default.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np


class InvalidParams(ValueError):
    pass


@dataclass(frozen=True)
class WorkloadTrace:
    rates: tuple[float, ...]
    segment_seconds: int = 60

    def __post_init__(self):
        rates = tuple(float(r) for r in self.rates)
        if any(not math.isfinite(r) or r < 0 for r in rates):
            raise InvalidParams("trace rates must be finite and >= 0")
        if self.segment_seconds <= 0:
            raise InvalidParams("segment_seconds must be positive")
        object.__setattr__(self, "rates", rates)

    def __len__(self) -> int:
        return len(self.rates)

    @property
    def duration(self) -> int:
        return len(self.rates) * self.segment_seconds

    def rate_at(self, t: float) -> float:
        k = int(t // self.segment_seconds)
        if not 0 <= k < len(self.rates):
            return 0.0
        return self.rates[k]

    def per_second(self) -> np.ndarray:
        return np.repeat(np.asarray(self.rates, dtype=float), self.segment_seconds)

    def scaled(self, factor: float) -> "WorkloadTrace":
        return WorkloadTrace(tuple(r * factor for r in self.rates), self.segment_seconds)

    @classmethod
    def load(cls, path: str | Path, segment_seconds: int = 60) -> "WorkloadTrace":
        rates = []
        for line in Path(path).read_text().splitlines():
            line = line.split("#", 1)[0].strip()
            if line:
                rates.append(float(line))
        return cls(tuple(rates), segment_seconds)

    def save(self, path: str | Path) -> None:
        Path(path).write_text("".join(f"{r!r}\n" for r in self.rates))


def ramp(base: float, peak: float, t0: int, t1: int, duration: int, power: float = 2.0) -> WorkloadTrace:
    """Flat ``base`` before ``t0``, convex rise to ``peak`` at ``t1``, then flat.

    ``power`` > 1 gives the rise upward curvature.
    """
    if not 0 <= t0 < t1 <= duration:
        raise InvalidParams(f"need 0 <= t0 < t1 <= duration, got {t0}, {t1}, {duration}")
    if base < 0 or peak < 0 or power <= 0:
        raise InvalidParams("rates must be >= 0 and power > 0")
    rates = []
    for m in range(duration):
        if m < t0:
            rates.append(base)
        elif m >= t1:
            rates.append(peak)
        else:
            rates.append(base + (peak - base) * ((m - t0) / (t1 - t0)) ** power)
    return WorkloadTrace(tuple(rates))


def step(low: float, high: float, t0: int, duration: int) -> WorkloadTrace:
    if not 0 <= t0 <= duration or low < 0 or high < 0:
        raise InvalidParams(f"bad step parameters low={low} high={high} t0={t0} duration={duration}")
    return WorkloadTrace(tuple(low if m < t0 else high for m in range(duration)))


def sin_mix(
    base: float,
    amplitudes: Sequence[float],
    periods: Sequence[float],
    duration: int,
    phases: Sequence[float] | None = None,
) -> WorkloadTrace:
    """``base`` plus a sum of sinusoids, clipped at zero."""
    if len(amplitudes) != len(periods):
        raise InvalidParams("amplitudes and periods must have equal length")
    if any(p <= 0 for p in periods) or base < 0:
        raise InvalidParams("periods must be positive and base >= 0")
    phases = list(phases) if phases is not None else [0.0] * len(periods)
    m = np.arange(duration, dtype=float)
    y = np.full(duration, float(base))
    for a, p, ph in zip(amplitudes, periods, phases):
        y += a * np.sin(2 * np.pi * m / p + ph)
    return WorkloadTrace(tuple(np.clip(y, 0.0, None).tolist()))
