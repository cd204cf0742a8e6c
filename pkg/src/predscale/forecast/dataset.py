"""Synthetic load series for training the neural forecasters.

Series are in summed-CPU percent (0..100 per instance) and are built from
plateaus and power-law ramps, overlaid with a sinusoid mix and Gaussian
noise.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .train import Dataset


def synthetic_series(rng: np.random.Generator, length: int = 240, ceiling: float = 500.0) -> np.ndarray:
    """One load profile: alternating plateaus and ramps, a sinusoid mix, noise."""
    level = rng.uniform(0.04, 0.4) * ceiling
    out: list[float] = []
    while len(out) < length:
        out.extend([level] * int(rng.integers(10, 80)))
        dur = int(rng.integers(15, 60))
        t = np.arange(1, dur + 1) / dur
        if rng.uniform() < 0.7:
            target = rng.uniform(level, 0.95 * ceiling)
            power = rng.uniform(1.0, 3.0)  # rises bend upwards
        else:
            target = rng.uniform(0.02 * ceiling, level)
            power = rng.uniform(0.5, 2.0)
        out.extend((level + (target - level) * t**power).tolist())
        level = target
    series = np.asarray(out[:length])
    m = np.arange(length)
    for _ in range(int(rng.integers(0, 3))):
        amp = rng.uniform(0.0, 0.05) * ceiling
        series = series + amp * np.sin(2 * np.pi * m / rng.uniform(10, 120) + rng.uniform(0, 2 * np.pi))
    series = series + rng.normal(0.0, rng.uniform(0.0, 0.01) * ceiling, size=length)
    return np.clip(series, 0.0, ceiling)


def make_windows(series_list: Sequence[np.ndarray], window: int, horizon: int) -> tuple[np.ndarray, np.ndarray]:
    """Slice series into (last ``window`` samples, sample ``horizon`` steps later)."""
    xs, ys = [], []
    for s in series_list:
        s = np.asarray(s, dtype=float)
        n = len(s) - window - horizon + 1
        if n <= 0:
            continue
        idx = np.arange(window)[None, :] + np.arange(n)[:, None]
        xs.append(s[idx])
        ys.append(s[window - 1 + horizon : window - 1 + horizon + n])
    if not xs:
        return np.empty((0, window)), np.empty(0)
    return np.concatenate(xs), np.concatenate(ys)


def synthetic_dataset(
    n_series: int = 60,
    window: int = 20,
    horizon: int = 15,
    scale: float = 500.0,
    seed: int = 0,
    val_fraction: float = 0.2,
    length: int = 240,
) -> tuple[Dataset, Dataset]:
    """Normalised train/validation sets, split by whole series."""
    rng = np.random.default_rng(seed)
    series = [synthetic_series(rng, length, scale) for _ in range(n_series)]
    n_val = max(1, int(round(val_fraction * n_series)))
    X_tr, y_tr = make_windows(series[n_val:], window, horizon)
    X_va, y_va = make_windows(series[:n_val], window, horizon)
    return (
        Dataset(X_tr / scale, y_tr / scale, "train"),
        Dataset(X_va / scale, y_va / scale, "validation"),
    )


def series_from_text(text: str) -> list[np.ndarray]:
    """Parse one value per line; blank lines separate independent series."""
    series, cur = [], []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            if cur:
                series.append(np.asarray(cur))
                cur = []
            continue
        if line.startswith("#"):
            continue
        cur.append(float(line))
    if cur:
        series.append(np.asarray(cur))
    return series


def series_to_text(series_list: Sequence[np.ndarray]) -> str:
    return "\n\n".join("\n".join(repr(float(v)) for v in s) for s in series_list) + "\n"
