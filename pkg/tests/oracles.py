"""Independent reference implementations used as test oracles.

Each one is deliberately naive: no shared code with the package beyond the
parameter containers.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np


# --- least squares ----------------------------------------------------------


def ols_normal_equations(t, y) -> tuple[float, float]:
    """(slope, intercept) from the 2x2 normal equations in exact rationals.

    A float64 solve of X^T X beta = X^T y loses several digits when the
    intercept is close to zero, so the oracle avoids rounding altogether.
    """
    T = [Fraction(float(v)) for v in t]
    Y = [Fraction(float(v)) for v in y]
    n = len(T)
    st, sy = sum(T), sum(Y)
    stt = sum(a * a for a in T)
    sty = sum(a * b for a, b in zip(T, Y))
    slope = (n * sty - st * sy) / (n * stt - st * st)
    return float(slope), float((sy - slope * st) / n)


# --- alarms -----------------------------------------------------------------


def alarm_fire_indices(values, threshold: float, periods: int, comparator: str = ">") -> list[int]:
    """Rescan the whole history at every index.

    The alarm fires at ``i`` when the violation run ending at ``i``, counted
    from the most recent non-violation or previous firing, reaches
    ``periods``.
    """
    viol = [(v > threshold) if comparator == ">" else (v < threshold) for v in values]
    fired: list[int] = []
    for i in range(len(values)):
        start = 0
        for j in range(i, -1, -1):
            if not viol[j]:
                start = j + 1
                break
        if fired and fired[-1] >= start:
            start = fired[-1] + 1
        if viol[i] and i - start + 1 >= periods:
            fired.append(i)
    return fired


# --- percentiles ------------------------------------------------------------


def nearest_rank_sorted(values, pct: float) -> float:
    """Sort, then index at ceil(p/100 * n) - 1 with exact decimal arithmetic."""
    from decimal import Decimal

    s = sorted(values)
    rank = math.ceil(Decimal(str(pct)) * len(s) / 100)
    return s[max(rank, 1) - 1]


# --- optimisation -----------------------------------------------------------


def momentum_recurrence(theta0: float, grad, lr: float, beta: float, steps: int) -> list[float]:
    """Scalar heavy-ball iterates written out by hand."""
    thetas = [theta0]
    mu = 0.0
    th = theta0
    for _ in range(steps):
        mu = beta * mu + grad(th)
        th = th - lr * mu
        thetas.append(th)
    return thetas


# --- finite differences -----------------------------------------------------


def relu_preactivations(params, X) -> np.ndarray:
    """Every ReLU pre-activation (hidden units and the output clamp), flattened."""
    X = np.asarray(X, dtype=float)
    if params.kind == "rnn":
        if X.ndim == 2:
            X = X[:, :, None]
        s = np.zeros((X.shape[0], params.H))
        zs = []
        for t in range(X.shape[1]):
            z = np.concatenate([s, X[:, t, :]], axis=1) @ params.W_s.T + params.b_s
            zs.append(z.ravel())
            s = np.maximum(z, 0)
        u = np.concatenate([s, X[:, -1, :]], axis=1) @ params.W_o.T + params.b_o
        zs.append(u.ravel())
        return np.concatenate(zs)
    h = X
    zs = []
    for layer in params.layers:
        z = h @ layer.W.T + layer.b
        if layer.activation == "relu":
            zs.append(z.ravel())
            h = np.maximum(z, 0)
        else:
            h = z
    zs.append(h.ravel())
    return np.concatenate(zs)


def mse(params, X, y) -> float:
    out = params.predict_batch(X)
    return float(np.mean((out - np.asarray(y, dtype=float).reshape(-1)) ** 2))


def finite_difference_check(params, X, y, analytic, eps=1e-5, kink=1e-6, small=1e-6):
    """Compare ``analytic`` gradients with central differences.

    Components whose perturbation moves any ReLU across its kink, or that sit
    within ``kink`` of one, are skipped. A central difference at ``eps`` only
    resolves about 1e-16 * loss / eps in absolute terms, so components below
    ``small`` are compared by absolute error instead. Returns (worst relative
    error, relative count, worst absolute error on small components, small
    count, skipped count).
    """
    base_z = relu_preactivations(params, X)
    near_kink = np.min(np.abs(base_z)) < kink
    base_pattern = base_z > 0
    worst, checked, worst_abs, n_small, skipped = 0.0, 0, 0.0, 0, 0
    arrays = [a.copy() for a in params.arrays]
    for k, arr in enumerate(arrays):
        for idx in np.ndindex(arr.shape):
            plus = [a.copy() for a in arrays]
            minus = [a.copy() for a in arrays]
            plus[k][idx] += eps
            minus[k][idx] -= eps
            p_plus, p_minus = params.replace(plus), params.replace(minus)
            if (
                near_kink
                or not np.array_equal(relu_preactivations(p_plus, X) > 0, base_pattern)
                or not np.array_equal(relu_preactivations(p_minus, X) > 0, base_pattern)
            ):
                skipped += 1
                continue
            numeric = (mse(p_plus, X, y) - mse(p_minus, X, y)) / (2 * eps)
            a = float(analytic[k][idx])
            scale = max(abs(a), abs(numeric))
            if scale >= small:
                worst = max(worst, abs(a - numeric) / scale)
                checked += 1
            else:
                worst_abs = max(worst_abs, abs(a - numeric))
                n_small += 1
    return worst, checked, worst_abs, n_small, skipped
