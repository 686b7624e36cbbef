import math

import numpy as np
import pytest

from src.embedding.matrix import EmbeddingMatrix
from src.model.recurrent import (
    GATES,
    LSTMParams,
    NodeHistory,
    NumericalError,
    RNNParams,
    build_histories,
    last_present_step,
    lstm_backward_batch,
    lstm_forward,
    lstm_forward_batch,
    rnn_forward_batch,
    stack_histories,
    static_forward_batch,
)


def random_params(rng, d):
    params = LSTMParams.zeros(d)
    for value in params.arrays().values():
        value[...] = rng.normal(scale=0.7, size=value.shape)
    return params


def sigmoid(x):
    return 1.0 / (1.0 + math.exp(-x))


def scalar_lstm(params, rows):
    """Element-by-element LSTM written with Python floats only."""
    d = params.b_i.shape[0]
    h = [0.0] * d
    c = [0.0] * d
    arrays = params.arrays()
    for x in rows:
        pre = {}
        for gate in GATES:
            W, U, b = arrays[f"W_{gate}"], arrays[f"U_{gate}"], arrays[f"b_{gate}"]
            pre[gate] = [
                sum(W[r, k] * x[k] for k in range(len(x))) + sum(U[r, k] * h[k] for k in range(d)) + b[r]
                for r in range(d)
            ]
        i = [sigmoid(v) for v in pre["i"]]
        f = [sigmoid(v) for v in pre["f"]]
        o = [sigmoid(v) for v in pre["o"]]
        g = [math.tanh(v) for v in pre["g"]]
        c = [f[r] * c[r] + i[r] * g[r] for r in range(d)]
        h = [o[r] * math.tanh(c[r]) for r in range(d)]
    return np.array(h)


def history(rows, mask):
    return NodeHistory(np.asarray(rows, dtype=float), np.asarray(mask, dtype=bool))


def test_zero_parameters_give_zero_state():
    rng = np.random.default_rng(0)
    out = lstm_forward(history(rng.normal(size=(4, 3)), [True] * 4), LSTMParams.zeros(3))
    np.testing.assert_array_equal(out, np.zeros(3))


def test_single_step_matches_cell_formula():
    rng = np.random.default_rng(1)
    params = random_params(rng, 3)
    x = rng.normal(size=3)
    i = 1 / (1 + np.exp(-(params.W_i @ x + params.b_i)))
    o = 1 / (1 + np.exp(-(params.W_o @ x + params.b_o)))
    g = np.tanh(params.W_g @ x + params.b_g)
    expected = o * np.tanh(i * g)
    np.testing.assert_allclose(lstm_forward(history([x], [True]), params), expected, atol=1e-14)


@pytest.mark.parametrize("seed", range(5))
def test_matches_scalar_oracle(seed):
    rng = np.random.default_rng(seed)
    params = random_params(rng, 3)
    rows = rng.normal(size=(4, 3))
    np.testing.assert_allclose(lstm_forward(history(rows, [True] * 4), params), scalar_lstm(params, rows), atol=1e-12)


def test_absent_steps_are_skipped():
    rng = np.random.default_rng(2)
    params = random_params(rng, 2)
    rows = rng.normal(size=(4, 2))
    mask = np.array([False, True, False, True])
    rows[~mask] = 0.0
    expected = scalar_lstm(params, rows[mask])
    np.testing.assert_allclose(lstm_forward(history(rows, mask), params), expected, atol=1e-12)


def test_masked_inputs_are_never_read():
    rng = np.random.default_rng(3)
    params = random_params(rng, 2)
    X = rng.normal(size=(3, 4, 2))
    M = np.array([[True, False, True, True], [False, False, False, True], [True, True, True, True]])
    clean = np.where(M[:, :, None], X, 0.0)
    garbage = np.where(M[:, :, None], X, 1e6)
    h_clean, _ = lstm_forward_batch(params, clean, M)
    h_garbage, _ = lstm_forward_batch(params, garbage, M)
    np.testing.assert_array_equal(h_clean, h_garbage)


def test_masked_inputs_get_no_gradient():
    rng = np.random.default_rng(13)
    params = random_params(rng, 2)
    X = rng.normal(size=(3, 4, 2))
    M = np.array([[True, False, True, True], [False, True, False, True], [True, True, False, False]])
    dH = rng.normal(size=(3, 2))
    results = []
    for fill in (0.0, -7.5):
        _, cache = lstm_forward_batch(params, np.where(M[:, :, None], X, fill), M)
        results.append(lstm_backward_batch(params, cache, dH, X.shape))
    (grads_a, dX_a), (grads_b, dX_b) = results
    for name in grads_a:
        np.testing.assert_array_equal(grads_a[name], grads_b[name])
    np.testing.assert_array_equal(dX_a, dX_b)
    assert np.all(dX_a[~M] == 0.0)


def test_batch_matches_single_histories():
    rng = np.random.default_rng(4)
    params = random_params(rng, 3)
    X = rng.normal(size=(5, 3, 3))
    M = rng.random((5, 3)) < 0.7
    M[:, -1] = True
    X[~M] = 0.0
    H, _ = lstm_forward_batch(params, X, M)
    for b in range(5):
        np.testing.assert_allclose(H[b], lstm_forward(history(X[b], M[b]), params), atol=1e-14)


def test_non_finite_state_reports_step():
    params = random_params(np.random.default_rng(5), 2)
    X = np.zeros((1, 3, 2))
    X[0, 1, 0] = np.nan
    with pytest.raises(NumericalError) as info:
        lstm_forward_batch(params, X, np.ones((1, 3), dtype=bool))
    assert info.value.step == 1


def test_rnn_follows_tanh_recursion():
    rng = np.random.default_rng(6)
    params = RNNParams.initialize(3, rng)
    rows = rng.normal(size=(3, 3))
    h = np.zeros(3)
    for x in rows:
        h = np.tanh(params.A @ h + params.B @ x)
    H, _ = rnn_forward_batch(params, rows[None], np.ones((1, 3), dtype=bool))
    np.testing.assert_allclose(H[0], h, atol=1e-14)


def test_static_combiner_takes_last_present_row():
    X = np.arange(2 * 3 * 2, dtype=float).reshape(2, 3, 2)
    M = np.array([[True, True, False], [True, False, False]])
    H, last = static_forward_batch(X, M)
    assert last.tolist() == [1, 0]
    np.testing.assert_array_equal(H, X[[0, 1], [1, 0]])
    assert last_present_step(np.array([[False, False, True]])).tolist() == [2]


def test_lstm_initialization():
    params = LSTMParams.initialize(4, np.random.default_rng(0))
    np.testing.assert_array_equal(params.b_f, np.ones(4))
    assert np.all(np.abs(params.W_i) <= 0.5)
    assert set(params.arrays()) == {f"{kind}_{gate}" for kind in ("W", "U", "b") for gate in GATES}


def toy_series():
    node_index = {"a": 0, "b": 1, "c": 2}
    return [
        EmbeddingMatrix(np.array([[1.0, 2.0], [3.0, 4.0]]), ["a", "b"], node_index, 0),
        EmbeddingMatrix(np.array([[5.0, 6.0], [7.0, 8.0]]), ["a", "b"], node_index, 1),
        EmbeddingMatrix(np.array([[9.0, 10.0, 11.0], [12.0, 13.0, 14.0]]), ["a", "b", "c"], node_index, 2),
    ]


def test_histories_match_hand_assembly():
    histories = build_histories(toy_series())
    np.testing.assert_array_equal(histories["a"].matrix, [[1, 3], [5, 7], [9, 12]])
    np.testing.assert_array_equal(histories["a"].mask, [True, True, True])
    np.testing.assert_array_equal(histories["c"].matrix, [[0, 0], [0, 0], [11, 14]])
    np.testing.assert_array_equal(histories["c"].mask, [False, False, True])
    X, M = stack_histories([histories["a"], histories["c"]])
    assert X.shape == (2, 3, 2) and M.shape == (2, 3)


def test_history_validation():
    with pytest.raises(ValueError, match="no present step"):
        history(np.zeros((2, 2)), [False, False])
    with pytest.raises(ValueError, match="must be zero"):
        history([[1.0, 1.0], [2.0, 2.0]], [True, False])
