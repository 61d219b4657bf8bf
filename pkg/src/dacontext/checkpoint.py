"""Checkpoint files.

Layout (text lines are UTF-8, ``\\n`` terminated)::

    DCNCKPT v1
    key=value                      hyperparameters, model config, counters
    ...
    vocab <count>                  then one token per line
    labels <count>                 then one label per line
    <name> <ndim> <d1> ... <dn>    then prod(d) little-endian float64 values
    ...

Tensors are ``live.<param>``, ``avg.<param>`` and ``embeddings``.
"""

from __future__ import annotations

import json
from dataclasses import fields

import numpy as np

from . import tensor as T
from .context_models import ContextModelConfig
from .corpus import LabelSet, Vocabulary
from .embeddings import EmbeddingTable
from .training import Hyperparameters, TrainState, hyper_from_items, hyper_items

MAGIC = "DCNCKPT v1"
_ENDIAN = "<f8"


class CheckpointFormatError(ValueError):
    pass


def _tensor_block(name: str, arr: np.ndarray) -> bytes:
    head = f"{name} {arr.ndim}" + "".join(f" {d}" for d in arr.shape) + "\n"
    return head.encode() + np.ascontiguousarray(arr, dtype=_ENDIAN).tobytes()


def save_checkpoint(path, state: TrainState, extra: dict[str, str] | None = None) -> None:
    lines = [MAGIC]
    lines += [f"{k}={v}" for k, v in hyper_items(state.hyper)]
    cfg = state.config
    lines += [
        f"model={cfg.kind.value}",
        f"cell={cfg.cell.value if cfg.cell else ''}",
        f"n_context={cfg.n_context}",
        f"state.max_len={state.max_len}",
        f"state.step={state.step}",
        f"state.avg_count={state.avg_count}",
        f"state.epoch={state.epoch}",
        f"state.rng={json.dumps(state.rng.bit_generator.state, sort_keys=True)}",
    ]
    for k, v in (extra or {}).items():
        lines.append(f"extra.{k}={v}")
    lines.append(f"vocab {len(state.vocabulary)}")
    lines += state.vocabulary.itos
    lines.append(f"labels {len(state.labels)}")
    lines += state.labels.names
    blob = bytearray(("\n".join(lines) + "\n").encode("utf-8"))
    for name in sorted(state.params):
        blob += _tensor_block(f"live.{name}", state.params[name].data)
    for name in sorted(state.averaged):
        blob += _tensor_block(f"avg.{name}", state.averaged[name])
    blob += _tensor_block("embeddings", state.embeddings.matrix)
    with open(path, "wb") as fh:
        fh.write(bytes(blob))


def _line(fh) -> str:
    raw = fh.readline()
    if not raw:
        raise CheckpointFormatError("unexpected end of checkpoint")
    try:
        return raw.decode("utf-8").rstrip("\n")
    except UnicodeDecodeError:
        raise CheckpointFormatError("undecodable header line") from None


def _counted(fh, keyword: str) -> list[str]:
    head = _line(fh).split(" ")
    if len(head) != 2 or head[0] != keyword or not head[1].isdigit():
        raise CheckpointFormatError(f"expected '{keyword} <count>', got {' '.join(head)!r}")
    return [_line(fh) for _ in range(int(head[1]))]


def load_checkpoint(path) -> tuple[TrainState, dict[str, str]]:
    """Read a checkpoint; returns the state and its ``extra.*`` entries."""
    with open(path, "rb") as fh:
        if fh.readline().rstrip(b"\n") != MAGIC.encode():
            raise CheckpointFormatError(f"{path}: not a checkpoint (bad header)")
        items: dict[str, str] = {}
        while True:
            pos = fh.tell()
            line = _line(fh)
            if line.startswith("vocab "):
                fh.seek(pos)
                break
            if "=" not in line:
                raise CheckpointFormatError(f"{path}: malformed entry {line!r}")
            k, v = line.split("=", 1)
            items[k] = v
        vocab_tokens = _counted(fh, "vocab")
        label_names = _counted(fh, "labels")
        arrays: dict[str, np.ndarray] = {}
        while True:
            raw = fh.readline()
            if not raw:
                break
            parts = raw.decode("utf-8", errors="replace").split()
            try:
                name, ndim = parts[0], int(parts[1])
                shape = tuple(int(d) for d in parts[2:2 + ndim])
            except (IndexError, ValueError):
                raise CheckpointFormatError(f"{path}: malformed tensor header {raw!r}") from None
            if len(shape) != ndim:
                raise CheckpointFormatError(f"{path}: tensor {name} header lists {len(shape)} of {ndim} dims")
            count = int(np.prod(shape)) if shape else 1
            data = fh.read(8 * count)
            if len(data) != 8 * count:
                raise CheckpointFormatError(f"{path}: tensor {name} is truncated")
            arrays[name] = np.frombuffer(data, dtype=_ENDIAN).astype(np.float64).reshape(shape)

    try:
        hyper = hyper_from_items({f.name: items[f.name] for f in fields(Hyperparameters) if f.name in items})
        config = ContextModelConfig(items["model"], items["cell"] or None, int(items["n_context"]))
        max_len = int(items["state.max_len"])
        rng = np.random.default_rng()
        rng.bit_generator.state = json.loads(items["state.rng"])
    except (KeyError, ValueError) as exc:
        raise CheckpointFormatError(f"{path}: bad or missing entry: {exc}") from None
    if "embeddings" not in arrays:
        raise CheckpointFormatError(f"{path}: no embedding table")
    vocab = Vocabulary()
    vocab.itos, vocab.stoi = list(vocab_tokens), {t: i for i, t in enumerate(vocab_tokens)}
    live = {k[5:]: T.parameter(v.copy(), k[5:]) for k, v in arrays.items() if k.startswith("live.")}
    avg = {k[4:]: v.copy() for k, v in arrays.items() if k.startswith("avg.")}
    if set(live) != set(avg) or not live:
        raise CheckpointFormatError(f"{path}: live and averaged parameter sets differ")
    state = TrainState(
        config=config, hyper=hyper, vocabulary=vocab, labels=LabelSet(label_names),
        embeddings=EmbeddingTable(arrays["embeddings"].copy(), trainable=hyper.trainable_embeddings),
        max_len=max_len, params=live, averaged=avg,
        step=int(items.get("state.step", 0)), avg_count=int(items.get("state.avg_count", 0)),
        epoch=int(items.get("state.epoch", 0)), rng=rng,
    )
    extra = {k[6:]: v for k, v in items.items() if k.startswith("extra.")}
    return state, extra
