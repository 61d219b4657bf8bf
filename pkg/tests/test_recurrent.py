import math

import numpy as np
import pytest

from dacontext import tensor as T
from dacontext.recurrent import (Cell, GRUParams, HiddenState, LSTMParams, init_cell, run_sequence, step,
                                 zero_state)


def sig(x):
    return 1 / (1 + math.exp(-x))


def test_lstm_scalar_by_hand():
    # gate order i, f, o, g
    p = LSTMParams(T.constant(np.array([[0.5, -0.3, 0.8, 0.2]])), T.constant(np.array([[0.1, 0.2, -0.1, 0.4]])),
                   T.constant(np.array([0.0, 1.0, 0.0, 0.0])))
    h0, c0, x = 0.3, -0.2, 1.5
    i = sig(0.5 * x + 0.1 * h0)
    f = sig(-0.3 * x + 0.2 * h0 + 1.0)
    o = sig(0.8 * x - 0.1 * h0)
    g = math.tanh(0.2 * x + 0.4 * h0)
    c = f * c0 + i * g
    h = o * math.tanh(c)
    s = step(T.constant(np.array([x])), HiddenState(T.constant(np.array([h0])), T.constant(np.array([c0]))), p)
    assert abs(s.h.item() - h) < 1e-14 and abs(s.c.item() - c) < 1e-14


def test_gru_scalar_by_hand():
    # wx blocks z, r, candidate; wh blocks z, r
    p = GRUParams(T.constant(np.array([[0.4, -0.6, 0.9]])), T.constant(np.array([[0.3, 0.5]])),
                  T.constant(np.array([[-0.7]])), T.constant(np.array([0.1, 0.0, -0.2])))
    h0, x = 0.25, -1.2
    z = sig(0.4 * x + 0.1 + 0.3 * h0)
    r = sig(-0.6 * x + 0.5 * h0)
    cand = math.tanh(0.9 * x - 0.2 - 0.7 * r * h0)
    h = (1 - z) * h0 + z * cand
    s = step(T.constant(np.array([x])), HiddenState(T.constant(np.array([h0]))), p)
    assert abs(s.h.item() - h) < 1e-14


@pytest.mark.parametrize("cell", list(Cell))
def test_run_sequence_equals_unrolled_steps(rng, cell):
    p = init_cell(cell, 5, 4, rng, scale=0.5)
    xs = rng.normal(size=(2, 6, 5))
    out, last = run_sequence(T.constant(xs), None, p)
    state = zero_state(p, 2)
    for t in range(6):
        state = step(T.constant(xs[:, t]), state, p)
        np.testing.assert_array_equal(out.data[:, t], state.h.data)
    np.testing.assert_array_equal(last.h.data, state.h.data)


@pytest.mark.parametrize("cell", list(Cell))
def test_leading_pads_are_neutral(rng, cell):
    p = init_cell(cell, 3, 4, rng, scale=0.5)
    xs = rng.normal(size=(5, 3))
    out, last = run_sequence(T.constant(xs), np.array([False, False, True, True, True]), p)
    _, ref = run_sequence(T.constant(xs[2:]), None, p)
    np.testing.assert_array_equal(last.h.data, ref.h.data)
    assert np.all(out.data[:2] == 0.0)


def test_forget_bias_and_shapes(rng):
    p = init_cell(Cell.LSTM, 6, 3, rng, forget_bias=1.0)
    assert p.wx.shape == (6, 12) and p.wh.shape == (3, 12)
    np.testing.assert_array_equal(p.b.data, [0, 0, 0, 1, 1, 1, 0, 0, 0, 0, 0, 0])
    g = init_cell(Cell.GRU, 6, 3, rng)
    assert (g.wx.shape, g.wh.shape, g.wc.shape, g.b.shape) == ((6, 9), (3, 6), (3, 3), (9,))


def test_input_size_mismatch(rng):
    p = init_cell(Cell.GRU, 4, 2, rng)
    with pytest.raises(T.ShapeError):
        step(T.constant(np.ones(3)), zero_state(p), p)
