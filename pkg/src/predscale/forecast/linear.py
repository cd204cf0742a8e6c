"""Ordinary least squares over a time-indexed window."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence


class DegenerateWindow(ValueError):
    pass


@dataclass(frozen=True)
class LinearModel:
    slope: float
    intercept: float

    def __post_init__(self):
        if not (math.isfinite(self.slope) and math.isfinite(self.intercept)):
            raise ValueError(f"non-finite linear model {self!r}")


def fit_linear(window: Sequence[tuple[float, float]]) -> LinearModel:
    """Least-squares line through ``(t, value)`` pairs.

    Uses the centred form of the normal equations, which stays well
    conditioned when timestamps are large absolute seconds.
    """
    if len(window) < 2:
        raise DegenerateWindow(f"need at least 2 points, got {len(window)}")
    n = len(window)
    t_mean = math.fsum(t for t, _ in window) / n
    y_mean = math.fsum(y for _, y in window) / n
    sxx = math.fsum((t - t_mean) ** 2 for t, _ in window)
    if sxx == 0.0:
        raise DegenerateWindow("all timestamps are equal")
    sxy = math.fsum((t - t_mean) * (y - y_mean) for t, y in window)
    slope = sxy / sxx
    return LinearModel(slope, y_mean - slope * t_mean)


def predict_linear(model: LinearModel, t_future: float) -> float:
    return model.slope * t_future + model.intercept
