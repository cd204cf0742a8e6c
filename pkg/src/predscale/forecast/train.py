"""Gradient descent with momentum and validation-based early stopping."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .nets import loss as batch_loss

logger = logging.getLogger(__name__)


class NonFiniteLoss(FloatingPointError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    momentum: float = 0.9
    validation_check_every: int = 50
    patience: int = 5
    max_steps: int = 5000
    batch_size: Optional[int] = None  # None: full batch
    rng_seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must be in [0, 1)")
        if self.validation_check_every < 1 or self.patience < 1:
            raise ValueError("validation_check_every and patience must be >= 1")


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    split: str = "train"

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=float).reshape(-1)
        if self.X.ndim != 2 or self.X.shape[0] != self.y.shape[0]:
            raise ValueError(f"inconsistent dataset shapes {self.X.shape} / {self.y.shape}")
        if not np.all(np.isfinite(self.y)):
            raise ValueError("dataset targets must be finite")

    def __len__(self) -> int:
        return self.y.shape[0]

    @property
    def window_len(self) -> int:
        return self.X.shape[1]


@dataclass
class Checkpoint:
    step: int
    train_loss: float
    val_loss: float


@dataclass
class TrainHistory:
    checks: list[Checkpoint] = field(default_factory=list)
    best_step: int = 0
    best_val_loss: float = math.inf
    steps_run: int = 0
    stopped_early: bool = False

    @property
    def val_losses(self) -> list[float]:
        return [c.val_loss for c in self.checks]


def momentum_step(theta, velocity, grad, learning_rate: float, momentum: float):
    """One update: ``v <- beta*v + g`` then ``theta <- theta - lr*v``."""
    velocity = momentum * velocity + grad
    return theta - learning_rate * velocity, velocity


def train(
    params_init,
    train_set: Dataset,
    val_set: Dataset,
    cfg: TrainConfig = TrainConfig(),
    callback: Callable[[int, object], None] | None = None,
):
    """Fit ``params_init`` on ``train_set``; keep the best model on ``val_set``.

    Validation loss is measured before the first step and then every
    ``cfg.validation_check_every`` steps. Training stops after ``cfg.patience``
    consecutive checks without a strict improvement, or at ``cfg.max_steps``.
    Returns the parameters at the lowest recorded validation loss.

    ``callback(k, params)`` is invoked with the parameters after every step.
    """
    if len(train_set) == 0 or len(val_set) == 0:
        raise ValueError("train and validation sets must be non-empty")
    rng = np.random.default_rng(cfg.rng_seed)
    params = params_init
    theta = [a.copy() for a in params.arrays]
    velocity = [np.zeros_like(a) for a in theta]
    history = TrainHistory()
    best = params
    bad_checks = 0

    def check(step: int) -> bool:
        nonlocal best, bad_checks
        val = batch_loss(params, val_set.X, val_set.y)
        tr = batch_loss(params, train_set.X, train_set.y)
        if not math.isfinite(val) or not math.isfinite(tr):
            raise NonFiniteLoss(
                f"loss diverged at step {step} (train={tr}, val={val}); "
                f"learning rate {cfg.learning_rate} is probably too large"
            )
        history.checks.append(Checkpoint(step, tr, val))
        if val < history.best_val_loss:
            history.best_val_loss = val
            history.best_step = step
            best = params
            bad_checks = 0
        else:
            bad_checks += 1
        logger.debug("step %d train %.6g val %.6g", step, tr, val)
        return bad_checks >= cfg.patience

    check(0)
    n = len(train_set)
    for k in range(1, cfg.max_steps + 1):
        if cfg.batch_size is None or cfg.batch_size >= n:
            Xb, yb = train_set.X, train_set.y
        else:
            idx = rng.choice(n, size=cfg.batch_size, replace=False)
            Xb, yb = train_set.X[idx], train_set.y[idx]
        step_loss, grads = params.loss_and_grad(Xb, yb)
        if not math.isfinite(step_loss):
            raise NonFiniteLoss(f"training loss is {step_loss} at step {k}")
        for j, g in enumerate(grads):
            theta[j], velocity[j] = momentum_step(theta[j], velocity[j], g, cfg.learning_rate, cfg.momentum)
        if not all(np.all(np.isfinite(a)) for a in theta):
            raise NonFiniteLoss(f"parameters diverged at step {k}; lower the learning rate")
        params = params.replace(theta)
        history.steps_run = k
        if callback is not None:
            callback(k, params)
        if k % cfg.validation_check_every == 0 and check(k):
            history.stopped_early = True
            break
    logger.info(
        "trained %s for %d steps, best val %.6g at step %d",
        params.kind, history.steps_run, history.best_val_loss, history.best_step,
    )
    return best, history
