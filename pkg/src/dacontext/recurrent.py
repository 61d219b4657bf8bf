"""LSTM and GRU cells and a masked left-to-right sequence runner.

LSTM (forget gate, no peepholes), gate blocks ordered i, f, o, g::

    i, f, o = sigmoid(x Wx + h Wh + b)   g = tanh(...)
    c' = f * c + i * g                   h' = o * tanh(c')

GRU, blocks ordered z, r, candidate::

    z, r = sigmoid(x Wx + h Wh + b)
    h~ = tanh(x Wx_c + (r * h) Wc + b_c)
    h' = (1 - z) * h + z * h~
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Sequence

import numpy as np

from . import tensor as T
from .tensor import ShapeError, Tensor


class Cell(str, Enum):
    LSTM = "LSTM"
    GRU = "GRU"


class HiddenState(NamedTuple):
    h: Tensor
    c: Tensor | None = None


@dataclass
class LSTMParams:
    wx: Tensor  # (input, 4h)
    wh: Tensor  # (h, 4h)
    b: Tensor   # (4h,)

    cell = Cell.LSTM

    def __post_init__(self):
        h = self.wh.shape[0]
        if self.wh.shape != (h, 4 * h) or self.wx.shape[1:] != (4 * h,) or self.b.shape != (4 * h,):
            raise ShapeError(f"inconsistent LSTM shapes {self.wx.shape}, {self.wh.shape}, {self.b.shape}")

    @property
    def hidden_size(self) -> int:
        return self.wh.shape[0]

    @property
    def input_size(self) -> int:
        return self.wx.shape[0]

    def tensors(self, prefix: str = "rnn") -> dict[str, Tensor]:
        return {f"{prefix}.wx": self.wx, f"{prefix}.wh": self.wh, f"{prefix}.b": self.b}


@dataclass
class GRUParams:
    wx: Tensor  # (input, 3h)
    wh: Tensor  # (h, 2h), gates z and r
    wc: Tensor  # (h, h), candidate
    b: Tensor   # (3h,)

    cell = Cell.GRU

    def __post_init__(self):
        h = self.wc.shape[0]
        ok = (self.wc.shape == (h, h) and self.wh.shape == (h, 2 * h)
              and self.wx.shape[1:] == (3 * h,) and self.b.shape == (3 * h,))
        if not ok:
            raise ShapeError(f"inconsistent GRU shapes {self.wx.shape}, {self.wh.shape}, {self.wc.shape}, {self.b.shape}")

    @property
    def hidden_size(self) -> int:
        return self.wc.shape[0]

    @property
    def input_size(self) -> int:
        return self.wx.shape[0]

    def tensors(self, prefix: str = "rnn") -> dict[str, Tensor]:
        return {f"{prefix}.wx": self.wx, f"{prefix}.wh": self.wh, f"{prefix}.wc": self.wc, f"{prefix}.b": self.b}


def params_from_tensors(cell: Cell, tensors: dict[str, Tensor], prefix: str = "rnn"):
    if Cell(cell) is Cell.LSTM:
        return LSTMParams(tensors[f"{prefix}.wx"], tensors[f"{prefix}.wh"], tensors[f"{prefix}.b"])
    return GRUParams(tensors[f"{prefix}.wx"], tensors[f"{prefix}.wh"], tensors[f"{prefix}.wc"], tensors[f"{prefix}.b"])


def init_lstm(input_size: int, hidden: int, rng: np.random.Generator, scale: float = 0.08,
              forget_bias: float = 1.0) -> LSTMParams:
    b = np.zeros(4 * hidden)
    b[hidden:2 * hidden] = forget_bias
    return LSTMParams(
        T.parameter(rng.uniform(-scale, scale, (input_size, 4 * hidden)), "rnn.wx"),
        T.parameter(rng.uniform(-scale, scale, (hidden, 4 * hidden)), "rnn.wh"),
        T.parameter(b, "rnn.b"),
    )


def init_gru(input_size: int, hidden: int, rng: np.random.Generator, scale: float = 0.08) -> GRUParams:
    return GRUParams(
        T.parameter(rng.uniform(-scale, scale, (input_size, 3 * hidden)), "rnn.wx"),
        T.parameter(rng.uniform(-scale, scale, (hidden, 2 * hidden)), "rnn.wh"),
        T.parameter(rng.uniform(-scale, scale, (hidden, hidden)), "rnn.wc"),
        T.parameter(np.zeros(3 * hidden), "rnn.b"),
    )


def init_cell(cell: Cell, input_size: int, hidden: int, rng: np.random.Generator, scale: float = 0.08,
              forget_bias: float = 1.0):
    if Cell(cell) is Cell.LSTM:
        return init_lstm(input_size, hidden, rng, scale, forget_bias)
    return init_gru(input_size, hidden, rng, scale)


def zero_state(params, batch: int | None = None) -> HiddenState:
    shape = (params.hidden_size,) if batch is None else (batch, params.hidden_size)
    h = T.constant(np.zeros(shape))
    c = T.constant(np.zeros(shape)) if params.cell is Cell.LSTM else None
    return HiddenState(h, c)


def _to_rows(x: Tensor, state: HiddenState, params):
    if x.shape[-1] != params.input_size:
        raise ShapeError(f"cell expects inputs of size {params.input_size}, got {x.shape}")
    if state.h.shape[-1] != params.hidden_size or state.h.ndim != x.ndim:
        raise ShapeError(f"state {state.h.shape} does not fit input {x.shape} / hidden {params.hidden_size}")
    if x.ndim == 2:
        return x, state, False
    if x.ndim != 1:
        raise ShapeError(f"cell input must be a vector or a batch of vectors, got {x.shape}")
    row = lambda t: None if t is None else T.reshape(t, (1, t.shape[0]))  # noqa: E731
    return row(x), HiddenState(row(state.h), row(state.c)), True


def _unrow(state: HiddenState, single: bool) -> HiddenState:
    if not single:
        return state
    flat = lambda t: None if t is None else T.reshape(t, (t.shape[1],))  # noqa: E731
    return HiddenState(flat(state.h), flat(state.c))


def _bias(b: Tensor, rows: int) -> Tensor:
    return T.broadcast_to(b, (rows, b.shape[0]))


def lstm_step(x: Tensor, state: HiddenState, params: LSTMParams) -> HiddenState:
    x, state, single = _to_rows(x, state, params)
    if state.c is None:
        raise ShapeError("LSTM state needs a cell vector")
    H = params.hidden_size
    z = T.matmul(x, params.wx) + T.matmul(state.h, params.wh) + _bias(params.b, x.shape[0])
    i = T.sigmoid(z[:, :H])
    f = T.sigmoid(z[:, H:2 * H])
    o = T.sigmoid(z[:, 2 * H:3 * H])
    g = T.tanh(z[:, 3 * H:])
    c = f * state.c + i * g
    h = o * T.tanh(c)
    return _unrow(HiddenState(h, c), single)


def gru_step(x: Tensor, state: HiddenState, params: GRUParams) -> HiddenState:
    x, state, single = _to_rows(x, state, params)
    H = params.hidden_size
    h = state.h
    zx = T.matmul(x, params.wx) + _bias(params.b, x.shape[0])
    gates = T.sigmoid(zx[:, :2 * H] + T.matmul(h, params.wh))
    z = gates[:, :H]
    r = gates[:, H:]
    cand = T.tanh(zx[:, 2 * H:] + T.matmul(r * h, params.wc))
    ones = T.constant(np.ones(h.shape))
    h_new = (ones - z) * h + z * cand
    return _unrow(HiddenState(h_new), single)


def step(x: Tensor, state: HiddenState, params) -> HiddenState:
    if params.cell is Cell.LSTM:
        return lstm_step(x, state, params)
    return gru_step(x, state, params)


def run_sequence(xs: Tensor | Sequence[Tensor], mask, params, h0: HiddenState | None = None):
    """Run the cell left to right over positions.

    ``xs`` is (m, input) or (B, m, input). Masked positions carry the state
    through unchanged and emit zero outputs. Returns ``(outputs, last)`` with
    outputs shaped like ``xs`` but with hidden-size features.
    """
    if not isinstance(xs, Tensor):
        xs = list(xs)
        if not xs:
            raise ValueError("run_sequence needs at least one position")
        xs = T.stack(xs, axis=-2)
    single = xs.ndim == 2
    if single:
        xs = T.reshape(xs, (1,) + xs.shape)
    if xs.ndim != 3:
        raise ShapeError(f"run_sequence expects (m, input) or (B, m, input), got {xs.shape}")
    B, m, _ = xs.shape
    if m == 0:
        raise ValueError("run_sequence needs at least one position")
    mask = np.ones((B, m), dtype=bool) if mask is None else np.asarray(mask, dtype=bool).reshape(B, m)

    if h0 is None:
        state = zero_state(params, B)
    elif single:
        state = HiddenState(*(None if t is None else T.reshape(t, (1,) + t.shape) for t in h0))
    else:
        state = h0

    H = params.hidden_size
    outputs = []
    for t in range(m):
        new = step(xs[:, t, :], state, params)
        keep = mask[:, t]
        if keep.all():
            state = new
            outputs.append(new.h)
            continue
        on = T.constant(np.broadcast_to(keep[:, None], (B, H)).astype(np.float64))
        off = T.constant(1.0 - on.data)
        h = new.h * on + state.h * off
        c = None if new.c is None else new.c * on + state.c * off
        state = HiddenState(h, c)
        outputs.append(new.h * on)
    out = T.stack(outputs, axis=1)
    if single:
        out = T.reshape(out, (m, H))
        state = _unrow(state, True)
    return out, state
