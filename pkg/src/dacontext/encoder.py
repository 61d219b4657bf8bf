"""Multi-window CNN utterance encoder with 1-max pooling.

A filter of width w spans every embedding row and ``w`` consecutive words.
Output position x sees words ``x - w//2 ... x - w//2 + w - 1``; words outside
the utterance are zeros, so every width yields one activation per word.
Taps are applied in reading order (cross-correlation).

Batched inputs use the layout (N, L, d): N utterances, L positions, d
embedding dimensions. The single-utterance helpers take the (d, L) matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .tensor import ShapeError, Tensor

DEFAULT_WIDTHS = (3, 4, 5)


@dataclass
class ConvFilterBank:
    widths: tuple[int, ...]
    weights: dict[int, Tensor]  # width -> (feature_maps, d, width)
    biases: dict[int, Tensor] = field(default_factory=dict)  # width -> (feature_maps,)

    def __post_init__(self):
        if len(set(self.widths)) != len(self.widths):
            raise ValueError(f"filter widths must be distinct, got {self.widths}")
        maps = {self.weights[w].shape[0] for w in self.widths}
        if len(maps) != 1:
            raise ValueError("every width needs the same number of feature maps")

    @property
    def feature_maps(self) -> int:
        return self.weights[self.widths[0]].shape[0]

    @property
    def input_dim(self) -> int:
        return self.weights[self.widths[0]].shape[1]

    @property
    def output_dim(self) -> int:
        return self.feature_maps * len(self.widths)

    def tensors(self, prefix: str = "encoder") -> dict[str, Tensor]:
        out = {}
        for w in self.widths:
            out[f"{prefix}.w{w}"] = self.weights[w]
            if w in self.biases:
                out[f"{prefix}.b{w}"] = self.biases[w]
        return out

    @classmethod
    def from_tensors(cls, tensors: dict[str, Tensor], widths, prefix: str = "encoder") -> "ConvFilterBank":
        weights = {w: tensors[f"{prefix}.w{w}"] for w in widths}
        biases = {w: tensors[f"{prefix}.b{w}"] for w in widths if f"{prefix}.b{w}" in tensors}
        return cls(tuple(widths), weights, biases)


def init_filter_bank(d: int, widths=DEFAULT_WIDTHS, feature_maps: int = 100, scale: float = 0.01,
                     rng: np.random.Generator | None = None, bias: bool = True) -> ConvFilterBank:
    rng = rng if rng is not None else np.random.default_rng(0)
    weights, biases = {}, {}
    for w in widths:
        weights[w] = T.parameter(rng.uniform(-scale, scale, size=(feature_maps, d, w)), name=f"encoder.w{w}")
        if bias:
            biases[w] = T.parameter(np.zeros(feature_maps), name=f"encoder.b{w}")
    return ConvFilterBank(tuple(widths), weights, biases)


def _windows(x: Tensor, width: int) -> Tensor:
    n, length, d = x.shape
    left = width // 2
    right = width - 1 - left
    parts = []
    if left:
        parts.append(T.constant(np.zeros((n, left, d))))
    parts.append(x)
    if right:
        parts.append(T.constant(np.zeros((n, right, d))))
    padded = T.concat(parts, axis=1) if len(parts) > 1 else x
    idx = np.arange(length)[:, None] + np.arange(width)[None, :]
    return T.reshape(padded[:, idx, :], (n * length, width * d))


def conv_batch(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """(N, L, d) input, (F, d, w) filters -> (N, L, F) pre-activations."""
    if x.ndim != 3:
        raise ShapeError(f"conv_batch expects (N, L, d) input, got {x.shape}")
    n, length, d = x.shape
    maps, fd, width = weight.shape
    if fd != d:
        raise ShapeError(f"filter spans {fd} embedding rows but input has {d}")
    kernel = T.reshape(T.transpose(weight, (2, 1, 0)), (width * d, maps))
    out = T.matmul(_windows(x, width), kernel)
    if bias is not None:
        out = out + T.broadcast_to(bias, out.shape)
    return T.reshape(out, (n, length, maps))


def convolve(inp: Tensor, filt: Tensor, bias=None) -> Tensor:
    """One filter over one utterance: (d, L) input, (d, w) filter -> (L,)."""
    if inp.ndim != 2 or filt.ndim != 2:
        raise ShapeError(f"convolve expects 2-d input and filter, got {inp.shape} and {filt.shape}")
    d, length = inp.shape
    if filt.shape[0] != d:
        raise ShapeError(f"filter spans {filt.shape[0]} embedding rows but input has {d}")
    if length < 1:
        raise ShapeError("convolve needs at least one position")
    x = T.reshape(T.transpose(inp), (1, length, d))
    weight = T.reshape(filt, (1,) + filt.shape)
    b = None
    if bias is not None:
        b = T.reshape(bias if isinstance(bias, Tensor) else T.constant(bias), (1,))
    return T.reshape(conv_batch(x, weight, b), (length,))


def encode_batch(x: Tensor, bank: ConvFilterBank, position_mask: np.ndarray | None = None) -> Tensor:
    """(N, L, d) -> (N, len(widths) * feature_maps).

    For each width: convolve, ReLU, max over positions. Blocks are ordered by
    ascending width. ``position_mask`` (N, L) excludes positions from the max.
    """
    mask = None if position_mask is None else np.asarray(position_mask, dtype=bool)[:, :, None]
    feats = []
    for w in sorted(bank.widths):
        act = T.relu(conv_batch(x, bank.weights[w], bank.biases.get(w)))
        feats.append(T.max_pool(act, axes=1, mask=mask).values)
    return T.concat(feats, axis=1) if len(feats) > 1 else feats[0]


def encode_utterance(matrix: Tensor, bank: ConvFilterBank) -> Tensor:
    """(d, L) embedding matrix -> utterance vector."""
    if matrix.ndim != 2:
        raise ShapeError(f"encode_utterance expects a (d, L) matrix, got {matrix.shape}")
    d, length = matrix.shape
    x = T.reshape(T.transpose(matrix), (1, length, d))
    out = encode_batch(x, bank)
    return T.reshape(out, (bank.output_dim,))
