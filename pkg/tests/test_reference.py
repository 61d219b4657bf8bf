"""Reference targets, plus an informational run on the real corpora when they are available.

Point ``DACONTEXT_MRDA`` or ``DACONTEXT_SWDA`` at a directory holding
``train.tsv``, ``validation.tsv`` and ``test.tsv``; ``DACONTEXT_EMBEDDINGS`` may name a
300-dimensional word vector file in text format. The run is never a pass/fail gate.
"""

import os

import pytest

from dacontext import reference
from dacontext.context_models import ContextModelConfig
from dacontext.corpus import load_corpus_dir
from dacontext.embeddings import load_pretrained
from dacontext.training import Hyperparameters, evaluate, train


def test_targets():
    assert reference.model_target("MRDA", ContextModelConfig("RNN_INPUT_ATTENTION", "LSTM", 3)) == 84.3
    assert reference.model_target("swda", ContextModelConfig("RNN_OUTPUT_ATTENTION", "LSTM", 2)) == 73.8
    assert reference.model_target("swda", ContextModelConfig("BASELINE_I")) == 71.3
    assert reference.model_target("other", ContextModelConfig("BASELINE_I")) is None
    assert reference.context_target("mrda", 3) == 84.3 and reference.context_target("swda", 0) is None
    for name, cfg in reference.BEST_MODEL.items():
        best = reference.model_target(name, cfg)
        assert best == reference.context_target(name, reference.BEST_CONTEXT[name])
        assert best == max(row[0 if name == "mrda" else 1] for row in reference.BY_MODEL.values())


@pytest.mark.parametrize("name", ["mrda", "swda"])
def test_reference_mode(name, capsys):
    path = os.environ.get(f"DACONTEXT_{name.upper()}")
    if not path or not os.path.isdir(path):
        pytest.skip(f"DACONTEXT_{name.upper()} not set; reference mode is informational only")
    corpus = load_corpus_dir(path)
    cfg = reference.BEST_MODEL[name]
    hyper = Hyperparameters(mini_batch_size=50 if name == "mrda" else 150, hidden_size=300)
    vectors = os.environ.get("DACONTEXT_EMBEDDINGS")
    table = load_pretrained(vectors, corpus.vocabulary, hyper.embedding_dim) if vectors else None
    result = train(corpus, cfg, hyper, table)
    acc = 100 * evaluate(result.state, corpus, "test").accuracy
    with capsys.disabled():
        print(f"\nreference mode {name}: {cfg.label} n={cfg.n_context} measured {acc:.1f}% "
              f"vs published {reference.model_target(name, cfg)}%")
