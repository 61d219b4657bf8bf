"""Context representations for a window of utterances.

A window's utterances form a sequence ordered oldest context first, current
utterance last. Missing context at the start of a conversation occupies the
leading positions and is masked, so it never contributes to any method.

Kinds:

* ``BASELINE_I``: CNN over the current utterance alone.
* ``BASELINE_II``: CNN over the real context utterances and the current one,
  their token matrices joined along the length axis.
* ``MAX``: coordinatewise max over the per-utterance vectors.
* ``ATTENTION``: attention-weighted sum of the per-utterance vectors.
* ``RNN``: last hidden state of an LSTM/GRU run over the vectors.
* ``RNN_OUTPUT_ATTENTION``: attention-weighted sum of the RNN outputs.
* ``RNN_INPUT_ATTENTION``: RNN over the attention-scaled vectors (order kept).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from . import tensor as T
from .attention import attention_weights, attentive_sum, order_preserved
from .corpus import ContextWindow, Vocabulary
from .embeddings import token_ids
from .encoder import ConvFilterBank, encode_batch, init_filter_bank
from .recurrent import Cell, init_cell, params_from_tensors, run_sequence
from .tensor import ShapeError, Tensor


class ModelKind(str, Enum):
    BASELINE_I = "BASELINE_I"
    BASELINE_II = "BASELINE_II"
    MAX = "MAX"
    ATTENTION = "ATTENTION"
    RNN = "RNN"
    RNN_OUTPUT_ATTENTION = "RNN_OUTPUT_ATTENTION"
    RNN_INPUT_ATTENTION = "RNN_INPUT_ATTENTION"


RNN_KINDS = frozenset({ModelKind.RNN, ModelKind.RNN_OUTPUT_ATTENTION, ModelKind.RNN_INPUT_ATTENTION})
ATTENTION_KINDS = frozenset({ModelKind.ATTENTION, ModelKind.RNN_OUTPUT_ATTENTION, ModelKind.RNN_INPUT_ATTENTION})

_DISPLAY = {
    ModelKind.BASELINE_I: "Baseline I",
    ModelKind.BASELINE_II: "Baseline II",
    ModelKind.MAX: "Max",
    ModelKind.ATTENTION: "Attention",
    ModelKind.RNN: "RNN",
    ModelKind.RNN_OUTPUT_ATTENTION: "RNN-Output-Attention",
    ModelKind.RNN_INPUT_ATTENTION: "RNN-Input-Attention",
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ContextModelConfig:
    kind: ModelKind
    cell: Cell | None = None
    n_context: int = 0

    def __post_init__(self):
        try:
            kind = ModelKind(self.kind)
            cell = None if self.cell is None else Cell(self.cell)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "cell", cell)
        if kind in RNN_KINDS and cell is None:
            raise ConfigError(f"{kind.value} needs a cell (LSTM or GRU)")
        if kind not in RNN_KINDS and cell is not None:
            raise ConfigError(f"{kind.value} does not use a recurrent cell")
        if not 0 <= self.n_context <= 5:
            raise ConfigError(f"n_context must lie in 0..5, got {self.n_context}")
        if kind is ModelKind.BASELINE_I:
            object.__setattr__(self, "n_context", 0)

    @property
    def label(self) -> str:
        name = _DISPLAY[self.kind]
        return f"{name} ({self.cell.value})" if self.cell else name


# --------------------------------------------------------------------------
# batches of windows
# --------------------------------------------------------------------------


@dataclass
class WindowBatch:
    ids: np.ndarray     # (B, m, L) token ids, zeros in masked slots
    mask: np.ndarray    # (B, m) True for real utterances; the last slot is the current one
    labels: np.ndarray  # (B,)

    def __len__(self) -> int:
        return self.ids.shape[0]

    def take(self, index) -> "WindowBatch":
        index = np.asarray(index)
        return WindowBatch(self.ids[index], self.mask[index], self.labels[index])


def make_batch(windows: Sequence[ContextWindow], vocab: Vocabulary, max_len: int) -> WindowBatch:
    if not windows:
        raise ValueError("make_batch needs at least one window")
    n = windows[0].n
    if any(w.n != n for w in windows):
        raise ValueError("windows in one batch must share the context length")
    m = n + 1
    ids = np.zeros((len(windows), m, max_len), dtype=np.int64)
    mask = np.zeros((len(windows), m), dtype=bool)
    labels = np.empty(len(windows), dtype=np.int64)
    for b, w in enumerate(windows):
        for j, u in enumerate(w.context + (w.current,)):
            ids[b, w.pad_count + j] = token_ids(u.tokens, vocab, max_len)
            mask[b, w.pad_count + j] = True
        labels[b] = w.label
    return WindowBatch(ids, mask, labels)


# --------------------------------------------------------------------------
# parameters
# --------------------------------------------------------------------------


def representation_dim(config: ContextModelConfig, encoder_dim: int, hidden_size: int) -> int:
    return hidden_size if config.kind in RNN_KINDS else encoder_dim


def attention_dim(config: ContextModelConfig, encoder_dim: int, hidden_size: int) -> int | None:
    if config.kind not in ATTENTION_KINDS:
        return None
    return hidden_size if config.kind is ModelKind.RNN_OUTPUT_ATTENTION else encoder_dim


def init_context_params(config: ContextModelConfig, embed_dim: int, rng: np.random.Generator,
                        widths=(3, 4, 5), feature_maps: int = 100, hidden_size: int = 300,
                        init_scale: float = 0.01, rnn_init_scale: float = 0.08,
                        forget_bias: float = 1.0, conv_bias: bool = True) -> dict[str, Tensor]:
    bank = init_filter_bank(embed_dim, widths, feature_maps, init_scale, rng, conv_bias)
    params = bank.tensors()
    att = attention_dim(config, bank.output_dim, hidden_size)
    if att is not None:
        params["attention.w"] = T.parameter(rng.uniform(-init_scale, init_scale, att), "attention.w")
    if config.kind in RNN_KINDS:
        cell = init_cell(config.cell, bank.output_dim, hidden_size, rng, rnn_init_scale, forget_bias)
        params.update(cell.tensors())
    return params


# --------------------------------------------------------------------------
# methods over per-utterance vectors
# --------------------------------------------------------------------------


def method_max(vectors: Tensor, mask) -> Tensor:
    mask = np.asarray(mask, dtype=bool)
    return T.max_pool(vectors, axes=vectors.ndim - 2, mask=mask[..., None]).values


def method_attention(vectors: Tensor, mask, w: Tensor) -> Tensor:
    return attentive_sum(vectors, attention_weights(vectors, mask, w))


def method_rnn(vectors: Tensor, mask, cell_params) -> Tensor:
    _, last = run_sequence(vectors, mask, cell_params)
    return last.h


def method_rnn_output_attention(vectors: Tensor, mask, cell_params, w: Tensor) -> Tensor:
    outputs, _ = run_sequence(vectors, mask, cell_params)
    return attentive_sum(outputs, attention_weights(outputs, mask, w))


def method_rnn_input_attention(vectors: Tensor, mask, cell_params, w: Tensor) -> Tensor:
    weighted = order_preserved(vectors, attention_weights(vectors, mask, w))
    _, last = run_sequence(weighted, mask, cell_params)
    return last.h


# --------------------------------------------------------------------------
# dispatch
# --------------------------------------------------------------------------


def _embed(ids: np.ndarray, table: Tensor) -> Tensor:
    if table.requires_grad:
        return table[ids]
    return T.constant(table.data[ids])


def concat_ids(batch: WindowBatch) -> tuple[np.ndarray, np.ndarray]:
    """Token ids of the real utterances of each window joined end to end.

    Returns ``(ids, position_mask)`` of shape (B, m * L); positions past the
    joined matrices are padding and masked out of the pooling.
    """
    B, m, L = batch.ids.shape
    ids = np.zeros((B, m * L), dtype=np.int64)
    pos = np.zeros((B, m * L), dtype=bool)
    for b in range(B):
        real = batch.ids[b, batch.mask[b]].reshape(-1)
        ids[b, :real.size] = real
        pos[b, :real.size] = True
    return ids, pos


def baseline_concat(batch: WindowBatch, table: Tensor, bank: ConvFilterBank) -> Tensor:
    ids, pos = concat_ids(batch)
    return encode_batch(_embed(ids, table), bank, pos)


def utterance_vectors(batch: WindowBatch, table: Tensor, bank: ConvFilterBank) -> Tensor:
    B, m, L = batch.ids.shape
    enc = encode_batch(_embed(batch.ids.reshape(B * m, L), table), bank)
    return T.reshape(enc, (B, m, bank.output_dim))


def represent(batch: WindowBatch, config: ContextModelConfig, params: dict[str, Tensor],
              table: Tensor, widths) -> Tensor:
    """Context representation for every window in ``batch``: (B, dim)."""
    m = batch.ids.shape[1]
    kind = config.kind
    if kind is not ModelKind.BASELINE_I and m != config.n_context + 1:
        raise ShapeError(f"batch has {m - 1} context slots but the model expects {config.n_context}")
    bank = ConvFilterBank.from_tensors(params, widths)
    if kind is ModelKind.BASELINE_I:
        current = batch.ids[:, -1, :]
        return encode_batch(_embed(current, table), bank)
    if kind is ModelKind.BASELINE_II:
        return baseline_concat(batch, table, bank)
    vecs = utterance_vectors(batch, table, bank)
    mask = batch.mask
    if kind is ModelKind.MAX:
        return method_max(vecs, mask)
    if kind is ModelKind.ATTENTION:
        return method_attention(vecs, mask, params["attention.w"])
    cell = params_from_tensors(config.cell, params)
    if kind is ModelKind.RNN:
        return method_rnn(vecs, mask, cell)
    if kind is ModelKind.RNN_OUTPUT_ATTENTION:
        return method_rnn_output_attention(vecs, mask, cell, params["attention.w"])
    return method_rnn_input_attention(vecs, mask, cell, params["attention.w"])


def forward(window: ContextWindow, config: ContextModelConfig, params: dict[str, Tensor], table: Tensor,
            vocab: Vocabulary, max_len: int, widths=(3, 4, 5)) -> Tensor:
    """Context representation of a single window."""
    if config.kind is not ModelKind.BASELINE_I and window.n != config.n_context:
        raise ConfigError(f"window has context length {window.n}, model expects {config.n_context}")
    rep = represent(make_batch([window], vocab, max_len), config, params, table, widths)
    return T.reshape(rep, (rep.shape[1],))
