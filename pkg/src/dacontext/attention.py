"""Linear-scored attention over sequences of vectors.

Sequences are tensors whose last two axes are (positions, features); any
leading axes are batch axes. Masks have the sequence's shape minus the feature
axis and mark real (True) versus padded (False) positions.
"""

from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np

from . import tensor as T
from .tensor import ShapeError, Tensor


class AttentionWeights(NamedTuple):
    alphas: Tensor
    mask: np.ndarray


def as_sequence(seq: Tensor | Sequence[Tensor]) -> Tensor:
    if isinstance(seq, Tensor):
        return seq
    return T.stack(list(seq), axis=-2 if seq[0].ndim else 0)


def score(u: Tensor, w: Tensor) -> Tensor:
    """w . u over the last axis of ``u``."""
    dim = u.shape[-1] if u.ndim else 0
    if w.shape != (dim,):
        raise ShapeError(f"attention vector has shape {w.shape}, inputs have dimension {dim}")
    lead = u.shape[:-1]
    s = T.matmul(T.reshape(u, (-1, dim)), T.reshape(w, (dim, 1)))
    return T.reshape(s, lead)


def attention_weights(sequence, mask, w: Tensor) -> AttentionWeights:
    seq = as_sequence(sequence)
    if mask is None:
        mask = np.ones(seq.shape[:-1], dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != seq.shape[:-1]:
        raise ShapeError(f"mask shape {mask.shape} does not match sequence {seq.shape}")
    if not mask.any(axis=-1).all():
        raise ValueError("attention over a sequence with every position masked")
    return AttentionWeights(T.softmax(score(seq, w), axis=-1, mask=mask), mask)


def order_preserved(sequence, weights: AttentionWeights) -> Tensor:
    """Each vector scaled by its weight, order and length kept."""
    seq = as_sequence(sequence)
    a = weights.alphas
    if a.shape != seq.shape[:-1]:
        raise ShapeError(f"{a.shape[-1] if a.ndim else 0} weights for a sequence of shape {seq.shape}")
    scaled = T.broadcast_to(T.reshape(a, a.shape + (1,)), seq.shape)
    return T.mul(scaled, seq)


def attentive_sum(sequence, weights: AttentionWeights) -> Tensor:
    """Weighted sum of the sequence: the order-preserved sequence summed over positions."""
    return T.sum(order_preserved(sequence, weights), axis=-2)
