"""Training experiments shared by the unit tests and the acceptance run.

Results are cached per process so the acceptance summary reuses the runs made
by the unit tests instead of training twice.
"""

import functools
import time
from dataclasses import dataclass

import numpy as np

from dacontext.context_models import ContextModelConfig, ModelKind
from dacontext.corpus import Conversation, Corpus, LabelSet, Utterance, Vocabulary, batch_iterator
from dacontext.recurrent import Cell
from dacontext.synth import GrammarConfig, synth_grammar
from dacontext.training import Hyperparameters, encode_split, evaluate, evaluate_batch, init_state, network, \
    train, train_step

# desk-scale settings for the grammar corpus; library defaults are sized for the real corpora
DESK = Hyperparameters(
    embedding_dim=32, hidden_size=32, feature_maps=100, mini_batch_size=10, epochs=10,
    init_scale=0.1, rnn_init_scale=0.2, seed=0,
)
DESK_CONTEXT = 2

# memorization settings: no dropout, a larger step, small batches
OVERFIT = Hyperparameters(
    embedding_dim=16, hidden_size=16, feature_maps=20, mini_batch_size=5, learning_rate=0.5,
    dropout_rate=0.0, init_scale=0.1, rnn_init_scale=0.2, seed=0,
)
OVERFIT_EPOCHS = 200

CONTEXT_VARIANTS = [(ModelKind.RNN, Cell.LSTM), (ModelKind.RNN, Cell.GRU),
                    (ModelKind.RNN_OUTPUT_ATTENTION, Cell.LSTM), (ModelKind.RNN_OUTPUT_ATTENTION, Cell.GRU),
                    (ModelKind.RNN_INPUT_ATTENTION, Cell.LSTM), (ModelKind.RNN_INPUT_ATTENTION, Cell.GRU)]


@dataclass(frozen=True)
class Outcome:
    accuracy: float
    epoch: int | None  # first epoch meeting the goal, if any
    seconds: float


def memorization_corpus(seed: int = 0, conversations: int = 5, length: int = 10) -> Corpus:
    """Random tokens with random labels: fitting it needs memorization, not structure."""
    rng = np.random.default_rng(seed)
    labels = LabelSet([f"da{i}" for i in range(4)])
    convs = []
    for c in range(conversations):
        utts = tuple(
            Utterance(tuple(f"t{x}" for x in rng.integers(0, 30, size=rng.integers(3, 7))),
                      int(rng.integers(4)), "AB"[t % 2])
            for t in range(length))
        convs.append(Conversation(f"c{c}", utts))
    return Corpus({"train": convs}, Vocabulary.build(convs), labels)


@functools.lru_cache(maxsize=None)
def overfit(kind: ModelKind, cell: Cell | None) -> Outcome:
    """Train on 50 windows; stop at the first epoch where the averaged model labels all of them right."""
    corpus = memorization_corpus()
    config = ContextModelConfig(kind, cell, 0 if kind is ModelKind.BASELINE_I else DESK_CONTEXT)
    t0 = time.perf_counter()
    state = init_state(corpus, config, OVERFIT)
    data = encode_split(state, corpus, "train")
    acc = 0.0
    for epoch in range(1, OVERFIT_EPOCHS + 1):
        for idx in batch_iterator(np.arange(len(data)), OVERFIT.mini_batch_size, OVERFIT.seed, epoch):
            train_step(state, data.take(idx))
        acc = evaluate_batch(network(state), data, len(corpus.labels)).accuracy
        if acc == 1.0:
            return Outcome(acc, epoch, time.perf_counter() - t0)
    return Outcome(acc, None, time.perf_counter() - t0)


@functools.lru_cache(maxsize=None)
def grammar_corpus(seed: int = 0):
    return synth_grammar(GrammarConfig(), seed)


@functools.lru_cache(maxsize=None)
def context_run(kind: ModelKind, cell: Cell | None) -> Outcome:
    """Test accuracy of the best-validation snapshot on the grammar corpus."""
    synth = grammar_corpus()
    config = ContextModelConfig(kind, cell, 0 if kind is ModelKind.BASELINE_I else DESK_CONTEXT)
    t0 = time.perf_counter()
    result = train(synth.corpus, config, DESK)
    acc = evaluate(result.state, synth.corpus, "test").accuracy
    return Outcome(acc, result.best_epoch, time.perf_counter() - t0)
