"""Recurrent and feed-forward forecasters with analytic gradients.

Both networks map a window of past samples to one value. The loss used for
training is the mean squared error over a batch; gradients are computed by
hand (backprop through time for the recurrent net) with the ReLU subgradient
taken as 0 at 0.

Shapes follow the math: weight matrices are ``(out, in)`` and act on column
vectors, so batched code multiplies by ``W.T``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class DimensionMismatch(ValueError):
    pass


def relu(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0)


def _check_finite(name: str, arr: np.ndarray) -> None:
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")


def _uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    a = np.sqrt(1.0 / fan_in)
    return rng.uniform(-a, a, size=shape)


# ---------------------------------------------------------------------------
# Recurrent network
# ---------------------------------------------------------------------------


@dataclass
class RnnParams:
    """Parameters of the ReLU recurrent cell.

    ``W_s`` is ``H x (H+I)`` and ``W_o`` is ``O x (H+I)``; both act on the
    concatenation ``[state, input]``.
    """

    W_s: np.ndarray
    b_s: np.ndarray
    W_o: np.ndarray
    b_o: np.ndarray

    kind = "rnn"

    def __post_init__(self):
        self.W_s = np.asarray(self.W_s, dtype=float)
        self.b_s = np.asarray(self.b_s, dtype=float).reshape(-1)
        self.W_o = np.asarray(self.W_o, dtype=float)
        self.b_o = np.asarray(self.b_o, dtype=float).reshape(-1)
        H = self.b_s.shape[0]
        if self.W_s.ndim != 2 or self.W_s.shape[0] != H or self.W_s.shape[1] <= H:
            raise DimensionMismatch(f"W_s shape {self.W_s.shape} inconsistent with H={H}")
        O = self.b_o.shape[0]
        if self.W_o.shape != (O, self.W_s.shape[1]):
            raise DimensionMismatch(f"W_o shape {self.W_o.shape}, expected {(O, self.W_s.shape[1])}")
        for name in ("W_s", "b_s", "W_o", "b_o"):
            _check_finite(name, getattr(self, name))

    @property
    def H(self) -> int:
        return self.b_s.shape[0]

    @property
    def I(self) -> int:  # noqa: E743
        return self.W_s.shape[1] - self.H

    @property
    def O(self) -> int:  # noqa: E743
        return self.b_o.shape[0]

    @classmethod
    def init(cls, H: int = 32, I: int = 1, O: int = 1, seed: int = 0) -> "RnnParams":  # noqa: E741
        rng = np.random.default_rng(seed)
        fan_in = H + I
        return cls(
            W_s=_uniform(rng, (H, fan_in), fan_in),
            b_s=_uniform(rng, (H,), fan_in),
            W_o=_uniform(rng, (O, fan_in), fan_in),
            b_o=_uniform(rng, (O,), fan_in),
        )

    @classmethod
    def zeros(cls, H: int, I: int = 1, O: int = 1) -> "RnnParams":  # noqa: E741
        return cls(np.zeros((H, H + I)), np.zeros(H), np.zeros((O, H + I)), np.zeros(O))

    @property
    def arrays(self) -> list[np.ndarray]:
        return [self.W_s, self.b_s, self.W_o, self.b_o]

    def replace(self, arrays: Sequence[np.ndarray]) -> "RnnParams":
        return RnnParams(*(np.array(a, dtype=float) for a in arrays))

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        return _rnn_batch(self, _as_batch(X, self.I))[0][:, 0]

    def loss_and_grad(self, X: np.ndarray, y: np.ndarray) -> tuple[float, list[np.ndarray]]:
        return _rnn_loss_and_grad(self, _as_batch(X, self.I), np.asarray(y, dtype=float))


def _as_batch(X, I: int) -> np.ndarray:  # noqa: E741
    X = np.asarray(X, dtype=float)
    if X.ndim == 2 and I == 1:
        X = X[:, :, None]
    if X.ndim != 3 or X.shape[2] != I:
        raise DimensionMismatch(f"batch of shape {X.shape} does not carry {I} inputs per step")
    return X


def rnn_step(s_prev, i_t, params: RnnParams) -> tuple[np.ndarray, np.ndarray]:
    """Advance the recurrent cell by one sample.

    The output is read from the *updated* state together with the current
    input, not from the previous state.
    """
    s_prev = np.asarray(s_prev, dtype=float)
    i_t = np.atleast_1d(np.asarray(i_t, dtype=float))
    if s_prev.shape[-1] != params.H or i_t.shape[-1] != params.I:
        raise DimensionMismatch(
            f"state {s_prev.shape} / input {i_t.shape} vs H={params.H}, I={params.I}"
        )
    s_t = relu(np.concatenate([s_prev, i_t], axis=-1) @ params.W_s.T + params.b_s)
    o_t = relu(np.concatenate([s_t, i_t], axis=-1) @ params.W_o.T + params.b_o)
    return s_t, o_t


def rnn_forward(window, params: RnnParams, s_0=None) -> float:
    seq = np.asarray(window, dtype=float)
    if seq.ndim == 1:
        seq = seq[:, None]
    if seq.ndim != 2 or seq.shape[1] != params.I or seq.shape[0] == 0:
        raise DimensionMismatch(f"window shape {np.shape(window)} for I={params.I}")
    s = np.zeros(params.H) if s_0 is None else np.asarray(s_0, dtype=float)
    o = np.zeros(params.O)
    for i_t in seq:
        s, o = rnn_step(s, i_t, params)
    return float(o[0])


def _rnn_batch(params: RnnParams, X: np.ndarray):
    B, T, _ = X.shape
    H = params.H
    s = np.zeros((B, H))
    xs, zs = [], []
    for t in range(T):
        x = np.concatenate([s, X[:, t, :]], axis=1)
        z = x @ params.W_s.T + params.b_s
        s = relu(z)
        xs.append(x)
        zs.append(z)
    xo = np.concatenate([s, X[:, -1, :]], axis=1)
    u = xo @ params.W_o.T + params.b_o
    return relu(u), (xs, zs, xo, u)


def _rnn_loss_and_grad(params: RnnParams, X: np.ndarray, y: np.ndarray):
    B = X.shape[0]
    out, (xs, zs, xo, u) = _rnn_batch(params, X)
    err = out - y.reshape(B, -1)
    loss = float(np.mean(err**2))
    H = params.H
    du = (2.0 / err.size) * err * (u > 0)
    gW_o = du.T @ xo
    gb_o = du.sum(axis=0)
    ds = du @ params.W_o[:, :H]
    gW_s = np.zeros_like(params.W_s)
    gb_s = np.zeros_like(params.b_s)
    for t in range(X.shape[1] - 1, -1, -1):
        dz = ds * (zs[t] > 0)
        gW_s += dz.T @ xs[t]
        gb_s += dz.sum(axis=0)
        ds = dz @ params.W_s[:, :H]
    return loss, [gW_s, gb_s, gW_o, gb_o]


# ---------------------------------------------------------------------------
# Multi-layer perceptron
# ---------------------------------------------------------------------------

ACTIVATIONS = ("relu", "identity")


@dataclass
class Layer:
    W: np.ndarray
    b: np.ndarray
    activation: str = "relu"

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=float)
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.W.ndim != 2 or self.W.shape[0] != self.b.shape[0]:
            raise DimensionMismatch(f"layer W {self.W.shape} vs b {self.b.shape}")
        _check_finite("W", self.W)
        _check_finite("b", self.b)


@dataclass
class MlpParams:
    """Stack of affine layers. The network output is clamped at 0."""

    layers: list[Layer] = field(default_factory=list)

    kind = "mlp"

    def __post_init__(self):
        if not self.layers:
            raise DimensionMismatch("an MLP needs at least one layer")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if nxt.W.shape[1] != prev.W.shape[0]:
                raise DimensionMismatch(
                    f"layer widths do not chain: {prev.W.shape} -> {nxt.W.shape}"
                )
        if self.layers[-1].W.shape[0] != 1:
            raise DimensionMismatch("final layer must have a single output")

    @property
    def input_width(self) -> int:
        return self.layers[0].W.shape[1]

    @property
    def widths(self) -> list[int]:
        return [self.input_width] + [layer.W.shape[0] for layer in self.layers]

    @classmethod
    def init(cls, widths: Sequence[int] = (20, 32, 32, 1), seed: int = 0) -> "MlpParams":
        rng = np.random.default_rng(seed)
        layers = []
        for k, (n_in, n_out) in enumerate(zip(widths, widths[1:])):
            act = "identity" if k == len(widths) - 2 else "relu"
            layers.append(Layer(_uniform(rng, (n_out, n_in), n_in), _uniform(rng, (n_out,), n_in), act))
        return cls(layers)

    @property
    def arrays(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out += [layer.W, layer.b]
        return out

    def replace(self, arrays: Sequence[np.ndarray]) -> "MlpParams":
        layers = [
            Layer(np.array(arrays[2 * k], dtype=float), np.array(arrays[2 * k + 1], dtype=float), layer.activation)
            for k, layer in enumerate(self.layers)
        ]
        return MlpParams(layers)

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.input_width:
            raise DimensionMismatch(f"batch {X.shape} vs input width {self.input_width}")
        return _mlp_batch(self, X)[0][:, 0]

    def loss_and_grad(self, X: np.ndarray, y: np.ndarray) -> tuple[float, list[np.ndarray]]:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.input_width:
            raise DimensionMismatch(f"batch {X.shape} vs input width {self.input_width}")
        return _mlp_loss_and_grad(self, X, np.asarray(y, dtype=float))


def _mlp_batch(params: MlpParams, X: np.ndarray):
    acts, pre = [X], []
    h = X
    for layer in params.layers:
        z = h @ layer.W.T + layer.b
        pre.append(z)
        h = relu(z) if layer.activation == "relu" else z
        acts.append(h)
    # output clamp keeps forecasts non-negative
    return relu(h), (acts, pre)


def _mlp_loss_and_grad(params: MlpParams, X: np.ndarray, y: np.ndarray):
    B = X.shape[0]
    out, (acts, pre) = _mlp_batch(params, X)
    err = out - y.reshape(B, -1)
    loss = float(np.mean(err**2))
    d = (2.0 / err.size) * err * (acts[-1] > 0)
    grads: list[np.ndarray] = []
    for k in range(len(params.layers) - 1, -1, -1):
        layer = params.layers[k]
        if layer.activation == "relu":
            d = d * (pre[k] > 0)
        grads[:0] = [d.T @ acts[k], d.sum(axis=0)]
        d = d @ layer.W
    return loss, grads


def mlp_forward(window, params: MlpParams) -> float:
    x = np.asarray(window, dtype=float).reshape(-1)
    if x.shape[0] != params.input_width:
        raise DimensionMismatch(f"window length {x.shape[0]} vs input width {params.input_width}")
    return float(_mlp_batch(params, x[None, :])[0][0, 0])


# ---------------------------------------------------------------------------


def gradient(params, X, y) -> list[np.ndarray]:
    """Gradient of the mean squared error over a batch, per parameter array."""
    if len(np.asarray(y).reshape(-1)) == 0:
        raise ValueError("empty batch")
    return params.loss_and_grad(X, y)[1]


def loss(params, X, y) -> float:
    err = params.predict_batch(X) - np.asarray(y, dtype=float).reshape(-1)
    return float(np.mean(err**2))
