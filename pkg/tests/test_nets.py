import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from oracles import finite_difference_check
from predscale.forecast.nets import (
    DimensionMismatch,
    Layer,
    MlpParams,
    RnnParams,
    gradient,
    loss,
    mlp_forward,
    rnn_forward,
    rnn_step,
)


def test_zero_params_give_zero():
    p = RnnParams.zeros(3)
    s, o = rnn_step(np.zeros(3), [0.7], p)
    assert np.all(s == 0) and np.all(o == 0)
    assert rnn_forward(np.linspace(0, 1, 20), p) == 0.0
    m = MlpParams([Layer(np.zeros((1, 20)), np.zeros(1), "identity")])
    assert mlp_forward(np.ones(20), m) == 0.0


def test_hand_step():
    p = RnnParams(W_s=[[1.0, 1.0]], b_s=[0.0], W_o=[[1.0, 0.0]], b_o=[0.0])
    s, o = rnn_step([0.5], [0.25], p)
    assert s.tolist() == [0.75]
    assert o.tolist() == [0.75]


def test_output_reads_updated_state():
    # W_o only sees the state; a stale state would give 0.5 rather than 0.75
    p = RnnParams(W_s=[[1.0, 1.0]], b_s=[0.0], W_o=[[1.0, 0.0]], b_o=[0.0])
    assert rnn_step([0.5], [0.25], p)[1][0] != 0.5


def test_hand_unroll_two_steps():
    p = RnnParams(W_s=[[0.5, 2.0]], b_s=[0.1], W_o=[[1.0, -1.0]], b_o=[0.2])
    # s1 = relu(0.5*0 + 2*0.3 + 0.1) = 0.7
    # s2 = relu(0.5*0.7 + 2*0.4 + 0.1) = 1.25
    # o2 = relu(1.25 - 0.4 + 0.2) = 1.05
    assert rnn_forward([0.3, 0.4], p) == pytest.approx(1.05, abs=1e-15)


def test_negative_preactivation_clamped():
    p = RnnParams(W_s=[[1.0, 1.0]], b_s=[-5.0], W_o=[[1.0, 1.0]], b_o=[-5.0])
    s, o = rnn_step([0.5], [0.25], p)
    assert s[0] == 0.0 and o[0] == 0.0


def test_mlp_mean_layer():
    w = np.random.default_rng(0).uniform(0, 100, size=20)
    m = MlpParams([Layer(np.full((1, 20), 1 / 20), np.zeros(1), "identity")])
    assert mlp_forward(w, m) == pytest.approx(w.mean(), rel=1e-14)


def test_forward_deterministic():
    p = RnnParams.init(8, seed=3)
    w = np.linspace(0, 1, 20)
    assert rnn_forward(w, p) == rnn_forward(w, p)
    m = MlpParams.init(seed=1)
    assert mlp_forward(w, m) == mlp_forward(w, m)


def test_batch_matches_single_forward():
    rng = np.random.default_rng(5)
    X = rng.uniform(0, 1, size=(7, 20))
    p = RnnParams.init(6, seed=2)
    m = MlpParams.init(seed=2)
    assert p.predict_batch(X) == pytest.approx([rnn_forward(x, p) for x in X], rel=1e-12)
    assert m.predict_batch(X) == pytest.approx([mlp_forward(x, m) for x in X], rel=1e-12)


def test_shape_errors():
    p = RnnParams.init(4)
    with pytest.raises(DimensionMismatch):
        rnn_step(np.zeros(3), [0.0], p)
    with pytest.raises(DimensionMismatch):
        RnnParams(np.zeros((2, 2)), np.zeros(2), np.zeros((1, 2)), np.zeros(1))
    with pytest.raises(DimensionMismatch):
        mlp_forward(np.zeros(5), MlpParams.init())
    with pytest.raises(ValueError):
        RnnParams(np.full((1, 2), np.nan), np.zeros(1), np.zeros((1, 2)), np.zeros(1))


def test_dead_output_has_zero_gradient():
    p = RnnParams(W_s=[[0.5, 0.5]], b_s=[0.0], W_o=[[1.0, 1.0]], b_o=[-100.0])
    X = np.random.default_rng(0).uniform(0, 1, size=(5, 10))
    grads = gradient(p, X, np.ones(5))
    assert all(np.all(g == 0) for g in grads)
    m = MlpParams([Layer(np.ones((3, 4)), np.zeros(3)), Layer(np.ones((1, 3)), [-1e3], "identity")])
    grads = gradient(m, np.ones((2, 4)), np.ones(2))
    assert all(np.all(g == 0) for g in grads)


@given(
    st.integers(1, 5),
    hnp.arrays(float, st.integers(1, 12), elements=st.floats(-100, 100, allow_nan=False)),
    st.integers(0, 2**31),
)
@settings(max_examples=80, deadline=None)
def test_outputs_never_negative(H, window, seed):
    p = RnnParams.init(H, seed=seed)
    assert rnn_forward(window, p) >= 0.0
    m = MlpParams.init((len(window), 4, 1), seed=seed)
    assert mlp_forward(window, m) >= 0.0


def _random_rnn(rng, H=4):
    fan = H + 1
    return RnnParams(
        rng.uniform(-1, 1, (H, fan)), rng.uniform(-1, 1, H), rng.uniform(-1, 1, (1, fan)), rng.uniform(0, 1, 1)
    )


def _random_mlp(rng, widths=(6, 4, 4, 1)):
    layers = []
    for k, (a, b) in enumerate(zip(widths, widths[1:])):
        act = "identity" if k == len(widths) - 2 else "relu"
        layers.append(Layer(rng.uniform(-1, 1, (b, a)), rng.uniform(-1, 1, b), act))
    return MlpParams(layers)


@pytest.mark.parametrize("kind", ["rnn", "mlp"])
def test_gradient_matches_finite_differences(kind):
    rng = np.random.default_rng(11)
    for _ in range(20):
        if kind == "rnn":
            p, X = _random_rnn(rng), rng.uniform(-1, 1, size=(3, 6))
        else:
            p, X = _random_mlp(rng), rng.uniform(-1, 1, size=(3, 6))
        y = rng.uniform(-1, 1, size=3)
        worst, checked, worst_abs, _, _ = finite_difference_check(p, X, y, gradient(p, X, y))
        assert worst < 1e-4 and worst_abs < 1e-9


def test_loss_and_grad_agree_with_loss():
    rng = np.random.default_rng(1)
    p = RnnParams.init(5, seed=0)
    X, y = rng.uniform(0, 1, (4, 8)), rng.uniform(0, 1, 4)
    assert p.loss_and_grad(X, y)[0] == pytest.approx(loss(p, X, y), rel=1e-14)
