"""Word-vector tables, frozen during training by default.

Pretrained vectors are read from the plain text format: a ``count dim`` header
line followed by ``word v1 ... vdim`` lines.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import OOV, PAD, Utterance, Vocabulary
from .tensor import Tensor

DEFAULT_SCALE = 0.25


class EmbeddingFormatError(ValueError):
    pass


@dataclass
class EmbeddingTable:
    matrix: np.ndarray
    trainable: bool = False
    coverage: float | None = None

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        if self.matrix.ndim != 2 or self.matrix.shape[0] < 2:
            raise ValueError(f"embedding matrix must be (vocab >= 2, dim), got {self.matrix.shape}")
        if not np.isfinite(self.matrix).all():
            raise ValueError("embedding matrix contains non-finite entries")

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __len__(self) -> int:
        return self.matrix.shape[0]

    def lookup(self, ids) -> np.ndarray:
        return self.matrix[np.asarray(ids, dtype=np.int64)]

    def as_tensor(self) -> Tensor:
        return Tensor(self.matrix, requires_grad=self.trainable, name="embeddings")


def init_random(vocab_size: int, d: int, scale: float = DEFAULT_SCALE, seed: int = 0) -> EmbeddingTable:
    if d < 1:
        raise ValueError(f"embedding dimension must be >= 1, got {d}")
    rng = np.random.default_rng(seed)
    m = rng.uniform(-scale, scale, size=(vocab_size, d))
    m[PAD] = 0.0
    return EmbeddingTable(m)


def load_pretrained(path, vocab: Vocabulary, dim: int | None = None,
                    scale: float = DEFAULT_SCALE, seed: int = 0) -> EmbeddingTable:
    """Copy vectors for vocabulary words found in ``path``; the rest stay random.

    ``coverage`` on the result is the fraction of non-reserved vocabulary words
    found in the file. An empty file needs ``dim``.
    """
    found: dict[int, np.ndarray] = {}
    file_dim = None
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            parts = raw.rstrip("\r\n").split(" ")
            if not raw.strip():
                continue
            if file_dim is None:
                if len(parts) != 2:
                    raise EmbeddingFormatError(f"{path}:{line_no}: header must be 'count dim'")
                try:
                    file_dim = int(parts[1])
                except ValueError:
                    raise EmbeddingFormatError(f"{path}:{line_no}: bad dimension {parts[1]!r}") from None
                if dim is not None and dim != file_dim:
                    raise EmbeddingFormatError(f"{path}: header dimension {file_dim} != requested {dim}")
                continue
            parts = [p for p in parts if p]
            word, values = parts[0], parts[1:]
            if len(values) != file_dim:
                raise EmbeddingFormatError(
                    f"{path}:{line_no}: expected {file_dim} values for {word!r}, found {len(values)}")
            try:
                vec = np.array([float(v) for v in values])
            except ValueError as exc:
                raise EmbeddingFormatError(f"{path}:{line_no}: {exc}") from None
            if not np.isfinite(vec).all():
                raise EmbeddingFormatError(f"{path}:{line_no}: non-finite value")
            idx = vocab.stoi.get(word)
            if idx is not None and idx not in (PAD, OOV):
                found[idx] = vec
    d = file_dim if file_dim is not None else dim
    if d is None:
        raise EmbeddingFormatError(f"{path}: empty file and no dimension given")
    table = init_random(len(vocab), d, scale, seed)
    for idx, vec in found.items():
        table.matrix[idx] = vec
    table.matrix[PAD] = 0.0
    words = len(vocab) - 2
    table.coverage = len(found) / words if words else 0.0
    return table


def token_ids(tokens, vocab: Vocabulary, max_len: int) -> np.ndarray:
    ids = np.zeros(max_len, dtype=np.int64)
    enc = vocab.encode(tokens)[:max_len]
    ids[:len(enc)] = enc
    return ids


def embed_utterance(u: Utterance | None, table: EmbeddingTable, vocab: Vocabulary, max_len: int) -> Tensor:
    """Embedding matrix of shape (d, max_len): one column per token, zero-padded.

    ``None`` stands for a missing context slot and gives the zero matrix.
    """
    if max_len < 1:
        raise ValueError(f"max_len must be >= 1, got {max_len}")
    if u is None:
        return Tensor(np.zeros((table.dim, max_len)))
    ids = token_ids(u.tokens, vocab, max_len)
    return Tensor(table.lookup(ids).T)
