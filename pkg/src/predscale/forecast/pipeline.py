"""Turning a summed-CPU window into a predicted per-instance average."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..metrics import MetricPoint, MetricStore, SeriesKey, TimeSeries
from .linear import fit_linear, predict_linear
from .nets import MlpParams, RnnParams

PREDICTED_AVG = SeriesKey("pred.cpu.avg")


class InsufficientWindow(ValueError):
    pass


@dataclass(frozen=True)
class ForecastConfig:
    window: int = 20
    horizon: int = 15  # in samples, i.e. minutes at the default period
    sample_period: int = 60
    scale: float = 500.0  # normaliser for neural inputs: 100 * max cluster size
    pad_short_windows: bool = False

    def __post_init__(self):
        if self.window < 2 or self.horizon < 1 or self.sample_period <= 0 or self.scale <= 0:
            raise ValueError(f"invalid forecast config {self!r}")

    @property
    def horizon_seconds(self) -> int:
        return self.horizon * self.sample_period


class LinearForecaster:
    name = "lr"

    def predict(self, timestamps, values, horizon_seconds: int) -> float:
        model = fit_linear(list(zip(timestamps, values)))
        return predict_linear(model, timestamps[-1] + horizon_seconds)


class NeuralForecaster:
    """Wraps RNN or MLP parameters trained on inputs divided by ``scale``."""

    def __init__(self, params, scale: float = 500.0):
        if not isinstance(params, (RnnParams, MlpParams)):
            raise TypeError(f"unsupported model {type(params).__name__}")
        self.params = params
        self.scale = scale
        self.name = params.kind

    def predict(self, timestamps, values, horizon_seconds: int) -> float:
        x = np.asarray(values, dtype=float)[None, :] / self.scale
        return float(self.params.predict_batch(x)[0]) * self.scale


def forecast_cluster_average(
    agg_window: TimeSeries,
    n_active: int,
    model,
    cfg: ForecastConfig = ForecastConfig(),
    store: MetricStore | None = None,
    key: SeriesKey = PREDICTED_AVG,
) -> MetricPoint:
    """Forecast the summed series and divide by the active instance count.

    The result is stamped ``horizon`` periods after the newest input sample
    and, when ``store`` is given, ingested under ``key``.
    """
    if n_active < 1:
        raise ValueError("need at least one active instance")
    points = agg_window.points[-cfg.window :]
    if not points:
        raise InsufficientWindow("empty aggregate window")
    if len(points) < cfg.window:
        if not cfg.pad_short_windows:
            raise InsufficientWindow(f"{len(points)} samples, need {cfg.window}")
        first = points[0]
        pad = [
            MetricPoint(first.timestamp - (k + 1) * cfg.sample_period, first.value)
            for k in range(cfg.window - len(points))
        ]
        points = pad[::-1] + points
    ts = [p.timestamp for p in points]
    vals = [p.value for p in points]
    predicted_sum = model.predict(ts, vals, cfg.horizon_seconds)
    point = MetricPoint(ts[-1] + cfg.horizon_seconds, predicted_sum / n_active)
    if store is not None:
        store.ingest(key, point)
    return point
