import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import ols_normal_equations
from predscale.forecast.linear import DegenerateWindow, LinearModel, fit_linear, predict_linear


def test_exact_line():
    m = fit_linear([(t, 2.0 * t) for t in range(20)])
    assert m.slope == pytest.approx(2.0, abs=1e-12)
    assert m.intercept == pytest.approx(0.0, abs=1e-10)


def test_constant():
    m = fit_linear([(t * 60, 7.0) for t in range(20)])
    assert m.slope == 0.0
    assert m.intercept == 7.0


def test_predict_examples():
    assert predict_linear(LinearModel(2.0, 0.0), 100) == 200.0
    assert predict_linear(LinearModel(0.0, 7.0), 12345.0) == 7.0


def test_degenerate():
    with pytest.raises(DegenerateWindow):
        fit_linear([(1.0, 2.0)])
    with pytest.raises(DegenerateWindow):
        fit_linear([(5.0, 1.0), (5.0, 2.0)])


def test_noisy_window_matches_oracle():
    rng = np.random.default_rng(3)
    t = np.arange(20) * 60.0 + 3000
    y = 0.05 * t + rng.normal(0, 5, size=20)
    m = fit_linear(list(zip(t, y)))
    slope, icpt = ols_normal_equations(t, y)
    assert m.slope == pytest.approx(slope, rel=1e-9)
    assert m.intercept == pytest.approx(icpt, rel=1e-9)
    assert predict_linear(m, t[-1] + 900) == pytest.approx(icpt + slope * (t[-1] + 900), rel=1e-9)


@given(
    st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=3, max_size=30),
    st.integers(0, 10**6),
    st.integers(1, 120),
)
@settings(max_examples=100, deadline=None)
def test_residuals_orthogonal(values, t0, step):
    t = np.arange(len(values)) * step + t0
    m = fit_linear(list(zip(t.tolist(), values)))
    r = np.asarray(values) - (m.slope * t + m.intercept)
    scale = max(1.0, float(np.max(np.abs(values))))
    tc = t - t.mean()
    # orthogonal to the constant and to the centred time column
    assert abs(r.sum()) <= 1e-8 * scale * len(values)
    assert abs(np.dot(r, tc)) <= 1e-8 * scale * float(np.sum(np.abs(tc))) + 1e-8
