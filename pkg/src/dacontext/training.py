"""Softmax head, averaged SGD, the epoch loop and evaluation."""

from __future__ import annotations

import copy
import csv
import logging
from dataclasses import dataclass, field, fields
from typing import Callable, Iterable

import numpy as np

from . import tensor as T
from .context_models import (
    ContextModelConfig,
    WindowBatch,
    init_context_params,
    make_batch,
    represent,
    representation_dim,
)
from .corpus import PAD, Corpus, LabelSet, Vocabulary, batch_iterator, default_max_len, make_context_windows
from .embeddings import EmbeddingTable, init_random
from .tensor import NonFiniteError, ShapeError, Tensor

log = logging.getLogger(__name__)

METRICS_HEADER = ("epoch", "split", "accuracy", "loss")


@dataclass
class Hyperparameters:
    filter_widths: tuple[int, ...] = (3, 4, 5)
    feature_maps: int = 100
    dropout_rate: float = 0.5
    activation: str = "relu"
    pooling: str = "1-max"
    mini_batch_size: int = 50
    embedding_dim: int = 300
    epochs: int = 30
    learning_rate: float = 0.1
    lr_decay: float = 0.9
    lr_decay_every: int = 2000
    seed: int = 0
    hidden_size: int = 300
    averaging_start: int = 1
    init_scale: float = 0.01
    rnn_init_scale: float = 0.08
    forget_bias: float = 1.0
    embedding_scale: float = 0.25
    trainable_embeddings: bool = False
    conv_bias: bool = True
    max_len: int = 0  # 0: 96th percentile of training utterance lengths
    eval_batch_size: int = 500

    def validate(self) -> None:
        if self.activation != "relu":
            raise ValueError(f"only relu activation is supported, got {self.activation!r}")
        if self.pooling != "1-max":
            raise ValueError(f"only 1-max pooling is supported, got {self.pooling!r}")
        if not self.filter_widths or len(set(self.filter_widths)) != len(self.filter_widths):
            raise ValueError(f"filter widths must be distinct and non-empty, got {self.filter_widths}")
        if min(self.filter_widths) < 1:
            raise ValueError("filter widths must be positive")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout_rate must lie in [0, 1), got {self.dropout_rate}")
        for name in ("feature_maps", "mini_batch_size", "embedding_dim", "hidden_size",
                     "lr_decay_every", "averaging_start", "eval_batch_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.epochs < 0 or self.max_len < 0:
            raise ValueError("epochs and max_len must be non-negative")
        if self.learning_rate <= 0 or not 0 < self.lr_decay <= 1:
            raise ValueError("learning_rate must be positive and lr_decay in (0, 1]")


# --------------------------------------------------------------------------
# schedule and averaged SGD
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class LRSchedule:
    lr0: float = 0.1
    decay: float = 0.9
    period: int = 2000

    def __call__(self, k: int) -> float:
        return self.lr0 * self.decay ** (k // self.period)


def lr_at(k: int, schedule: LRSchedule = LRSchedule()) -> float:
    """Learning rate before update ``k + 1``: lr0 * decay ** floor(k / period)."""
    if k < 0:
        raise ValueError("update count must be non-negative")
    return schedule(k)


@dataclass
class TrainState:
    config: ContextModelConfig
    hyper: Hyperparameters
    vocabulary: Vocabulary
    labels: LabelSet
    embeddings: EmbeddingTable
    max_len: int
    params: dict[str, Tensor]
    averaged: dict[str, np.ndarray]
    step: int = 0
    avg_count: int = 0
    epoch: int = 0
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))

    @property
    def schedule(self) -> LRSchedule:
        h = self.hyper
        return LRSchedule(h.learning_rate, h.lr_decay, h.lr_decay_every)

    @property
    def lr(self) -> float:
        return lr_at(self.step, self.schedule)

    def snapshot(self) -> "TrainState":
        clone = copy.copy(self)
        clone.params = {k: T.parameter(v.data.copy(), k) for k, v in self.params.items()}
        clone.averaged = {k: v.copy() for k, v in self.averaged.items()}
        clone.rng = copy.deepcopy(self.rng)
        return clone


def asgd_step(state: TrainState, grads: dict[str, np.ndarray]) -> TrainState:
    """One averaged-SGD update with mean-over-batch ``grads``."""
    for name, g in grads.items():
        if not np.isfinite(g).all():
            raise NonFiniteError(f"non-finite gradient for parameter {name!r} at update {state.step + 1}")
    lr = state.lr
    for name, p in state.params.items():
        g = grads.get(name)
        if g is None:
            continue
        if g.shape != p.shape:
            raise ShapeError(f"gradient for {name!r} has shape {g.shape}, parameter {p.shape}")
        p.data = p.data - lr * g
        if name == "embeddings":
            p.data[PAD] = 0.0
    state.step += 1
    if state.step >= state.hyper.averaging_start:
        state.avg_count += 1
        k = state.avg_count
        for name, p in state.params.items():
            avg = state.averaged[name]
            state.averaged[name] = p.data.copy() if k == 1 else avg + (p.data - avg) / k
    else:
        for name, p in state.params.items():
            state.averaged[name] = p.data.copy()
    return state


# --------------------------------------------------------------------------
# classifier head
# --------------------------------------------------------------------------


@dataclass
class SoftmaxClassifier:
    weight: Tensor  # (C, dim)
    bias: Tensor    # (C,)

    @property
    def n_classes(self) -> int:
        return self.weight.shape[0]

    def logits(self, rep: Tensor) -> Tensor:
        single = rep.ndim == 1
        x = T.reshape(rep, (1, rep.shape[0])) if single else rep
        if x.shape[1] != self.weight.shape[1]:
            raise ShapeError(f"classifier expects {self.weight.shape[1]}-dim input, got {rep.shape}")
        z = T.matmul(x, T.transpose(self.weight)) + T.broadcast_to(self.bias, (x.shape[0], self.n_classes))
        return T.reshape(z, (self.n_classes,)) if single else z


def classify(rep: Tensor, clf: SoftmaxClassifier, train: bool = False, rate: float = 0.5,
             rng: np.random.Generator | None = None) -> Tensor:
    """Posterior over classes; dropout on ``rep`` in train mode only."""
    return T.softmax(clf.logits(T.dropout(rep, rate, train, rng)), axis=-1)


cross_entropy = T.cross_entropy


class Network:
    """Forward pass of one model given a set of named parameter tensors."""

    def __init__(self, state: TrainState, tensors: dict[str, Tensor]):
        self.config = state.config
        self.hyper = state.hyper
        self.tensors = tensors
        emb = tensors.get("embeddings")
        self.table = emb if emb is not None else T.constant(state.embeddings.matrix)
        self.classifier = SoftmaxClassifier(tensors["classifier.w"], tensors["classifier.b"])

    def represent(self, batch: WindowBatch) -> Tensor:
        return represent(batch, self.config, self.tensors, self.table, self.hyper.filter_widths)

    def logits(self, batch: WindowBatch, train: bool = False, rng: np.random.Generator | None = None) -> Tensor:
        rep = T.dropout(self.represent(batch), self.hyper.dropout_rate, train, rng)
        return self.classifier.logits(rep)


def network(state: TrainState, averaged: bool = True) -> Network:
    if averaged:
        return Network(state, {k: T.constant(v) for k, v in state.averaged.items()})
    return Network(state, state.params)


def init_state(corpus: Corpus, config: ContextModelConfig, hyper: Hyperparameters,
               embeddings: EmbeddingTable | None = None) -> TrainState:
    hyper.validate()
    seeds = np.random.SeedSequence(hyper.seed).spawn(3)
    init_rng = np.random.default_rng(seeds[0])
    if embeddings is None:
        embeddings = init_random(len(corpus.vocabulary), hyper.embedding_dim, hyper.embedding_scale,
                                 int(seeds[1].generate_state(1)[0]))
    if len(embeddings) != len(corpus.vocabulary):
        raise ShapeError(f"embedding table has {len(embeddings)} rows, vocabulary {len(corpus.vocabulary)}")
    embeddings.trainable = hyper.trainable_embeddings
    params = init_context_params(
        config, embeddings.dim, init_rng, hyper.filter_widths, hyper.feature_maps, hyper.hidden_size,
        hyper.init_scale, hyper.rnn_init_scale, hyper.forget_bias, hyper.conv_bias)
    enc_dim = hyper.feature_maps * len(hyper.filter_widths)
    dim = representation_dim(config, enc_dim, hyper.hidden_size)
    C = len(corpus.labels)
    params["classifier.w"] = T.parameter(init_rng.uniform(-hyper.init_scale, hyper.init_scale, (C, dim)),
                                         "classifier.w")
    params["classifier.b"] = T.parameter(np.zeros(C), "classifier.b")
    if hyper.trainable_embeddings:
        params["embeddings"] = T.parameter(embeddings.matrix.copy(), "embeddings")
    max_len = hyper.max_len or default_max_len(corpus)
    return TrainState(
        config=config, hyper=hyper, vocabulary=corpus.vocabulary, labels=corpus.labels,
        embeddings=embeddings, max_len=max_len, params=params,
        averaged={k: v.data.copy() for k, v in params.items()},
        rng=np.random.default_rng(seeds[2]),
    )


# --------------------------------------------------------------------------
# evaluation
# --------------------------------------------------------------------------


@dataclass
class EvalResult:
    accuracy: float
    loss: float
    confusion: np.ndarray  # gold x predicted counts
    predictions: np.ndarray

    @property
    def total(self) -> int:
        return int(self.confusion.sum())

    @property
    def correct(self) -> int:
        return int(np.trace(self.confusion))


def encode_split(state: TrainState, corpus: Corpus, split: str) -> WindowBatch:
    windows = make_context_windows(corpus, split, state.config.n_context)
    return make_batch(windows, state.vocabulary, state.max_len)


def evaluate_batch(net: Network, data: WindowBatch, n_classes: int, batch_size: int = 500) -> EvalResult:
    preds = np.empty(len(data), dtype=np.int64)
    nll = 0.0
    for start in range(0, len(data), batch_size):
        part = data.take(np.arange(start, min(start + batch_size, len(data))))
        z = net.logits(part).data
        preds[start:start + len(part)] = z.argmax(axis=1)
        zs = z - z.max(axis=1, keepdims=True)
        lse = np.log(np.exp(zs).sum(axis=1))
        nll += float((lse - zs[np.arange(len(part)), part.labels]).sum())
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(confusion, (data.labels, preds), 1)
    return EvalResult(float(np.trace(confusion) / len(data)), nll / len(data), confusion, preds)


def evaluate(state: TrainState, corpus: Corpus, split: str, averaged: bool = True) -> EvalResult:
    """Accuracy of the argmax posterior (ties to the lowest class) in eval mode."""
    return evaluate_batch(network(state, averaged), encode_split(state, corpus, split),
                          len(state.labels), state.hyper.eval_batch_size)


# --------------------------------------------------------------------------
# training loop
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class MetricRecord:
    epoch: int
    split: str
    accuracy: float
    loss: float


@dataclass
class TrainResult:
    state: TrainState          # best-validation snapshot
    final: TrainState          # state after the last epoch
    history: list[MetricRecord]
    best_epoch: int
    best_accuracy: float


def train_step(state: TrainState, batch: WindowBatch) -> tuple[float, np.ndarray]:
    """Forward, backward and one ASGD update; returns the batch loss and predictions."""
    net = network(state, averaged=False)
    logits = net.logits(batch, train=True, rng=state.rng)
    loss = T.cross_entropy(logits, batch.labels)
    T.zero_grad(state.params.values())
    loss.backward()
    grads = {k: (p.grad if p.grad is not None else np.zeros_like(p.data)) for k, p in state.params.items()}
    if "embeddings" in grads:
        grads["embeddings"][PAD] = 0.0
    asgd_step(state, grads)
    T.zero_grad(state.params.values())
    return loss.item(), logits.data.argmax(axis=1)


def train(corpus: Corpus, config: ContextModelConfig, hyper: Hyperparameters,
          embeddings: EmbeddingTable | None = None, validation_split: str = "validation",
          on_epoch: Callable[[MetricRecord], None] | None = None) -> TrainResult:
    """Run ``hyper.epochs`` epochs of averaged SGD and keep the best validation snapshot.

    Validation uses the averaged parameters in eval mode; ties keep the earlier
    epoch. The ``train`` rows of the history report the running loss and
    accuracy of the live parameters with dropout on.
    """
    state = init_state(corpus, config, hyper, embeddings)
    train_data = encode_split(state, corpus, "train")
    val_data = encode_split(state, corpus, validation_split) if validation_split in corpus.splits else None
    history: list[MetricRecord] = []
    best, best_epoch, best_acc = state.snapshot(), 0, -1.0

    def emit(rec: MetricRecord):
        history.append(rec)
        if on_epoch is not None:
            on_epoch(rec)

    for epoch in range(1, hyper.epochs + 1):
        state.epoch = epoch
        loss_sum, correct = 0.0, 0
        for idx in batch_iterator(np.arange(len(train_data)), hyper.mini_batch_size, hyper.seed, epoch):
            batch = train_data.take(idx)
            loss, preds = train_step(state, batch)
            if not np.isfinite(loss):
                raise NonFiniteError(f"loss became non-finite in epoch {epoch}")
            loss_sum += loss * len(batch)
            correct += int((preds == batch.labels).sum())
        emit(MetricRecord(epoch, "train", correct / len(train_data), loss_sum / len(train_data)))
        if val_data is not None:
            res = evaluate_batch(network(state), val_data, len(state.labels), hyper.eval_batch_size)
            emit(MetricRecord(epoch, validation_split, res.accuracy, res.loss))
            if res.accuracy > best_acc:
                best, best_epoch, best_acc = state.snapshot(), epoch, res.accuracy
            log.info("epoch %d: train loss %.4f, %s accuracy %.4f", epoch, loss_sum / len(train_data),
                     validation_split, res.accuracy)
    if val_data is None:
        best, best_epoch = state.snapshot(), hyper.epochs
    return TrainResult(best, state, history, best_epoch, best_acc)


# --------------------------------------------------------------------------
# metrics files
# --------------------------------------------------------------------------


def write_metrics(path, records: Iterable[MetricRecord]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRICS_HEADER)
        for r in records:
            w.writerow([r.epoch, r.split, repr(float(r.accuracy)), repr(float(r.loss))])


def read_metrics(path) -> list[MetricRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != METRICS_HEADER:
        raise ValueError(f"{path}: metrics header must be {','.join(METRICS_HEADER)}")
    return [MetricRecord(int(e), s, float(a), float(l)) for e, s, a, l in rows[1:]]


def hyper_items(h: Hyperparameters) -> list[tuple[str, str]]:
    out = []
    for f in fields(h):
        v = getattr(h, f.name)
        if isinstance(v, tuple):
            v = ",".join(str(x) for x in v)
        elif isinstance(v, bool):
            v = "true" if v else "false"
        elif isinstance(v, float):
            v = repr(v)
        out.append((f.name, str(v)))
    return out


def hyper_from_items(items: dict[str, str]) -> Hyperparameters:
    kwargs = {}
    for f in fields(Hyperparameters):
        if f.name not in items:
            continue
        raw = items[f.name].strip()
        default = f.default
        if isinstance(default, tuple):
            kwargs[f.name] = tuple(int(x) for x in raw.split(",") if x.strip())
        elif isinstance(default, bool):
            if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(f"{f.name}: expected a boolean, got {raw!r}")
            kwargs[f.name] = raw.lower() in ("true", "1", "yes")
        elif isinstance(default, int):
            kwargs[f.name] = int(raw)
        elif isinstance(default, float):
            kwargs[f.name] = float(raw)
        else:
            kwargs[f.name] = raw
    return Hyperparameters(**kwargs)
