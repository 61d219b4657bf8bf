"""Where do the attention weights go?

Two attention models on the synthetic grammar. Plain attention sums the
weighted utterance vectors, so it cannot tell the previous utterance from the
one before it; the input-attention RNN keeps the weighted vectors in order and
reads them with a recurrent cell. For each model, compare the average weights
on windows whose label depends on context against self-contained ones.

    python3 demos/03_where_attention_looks.py   # about a minute on one core
"""

import numpy as np

from dacontext.attention import attention_weights
from dacontext.context_models import ContextModelConfig, make_batch, utterance_vectors
from dacontext.corpus import make_context_windows
from dacontext.encoder import ConvFilterBank
from dacontext.synth import GrammarConfig, synth_grammar
from dacontext.training import Hyperparameters, evaluate, network, train

synth = synth_grammar(GrammarConfig(), seed=1)
corpus = synth.corpus
hyper = Hyperparameters(embedding_dim=32, hidden_size=32, mini_batch_size=10, epochs=10,
                        init_scale=0.1, rnn_init_scale=0.2)
flags = np.array([f for conv in synth.ambiguous["test"] for f in conv])
print(f"context-free ceiling {synth.ceiling:.3f}\n")

for config in (ContextModelConfig("ATTENTION", None, 2), ContextModelConfig("RNN_INPUT_ATTENTION", "GRU", 2)):
    state = train(corpus, config, hyper).state
    print(f"{config.label}: test accuracy {evaluate(state, corpus, 'test').accuracy:.3f}")

    net = network(state)
    batch = make_batch(make_context_windows(corpus, "test", 2), state.vocabulary, state.max_len)
    bank = ConvFilterBank.from_tensors(net.tensors, hyper.filter_widths)
    vectors = utterance_vectors(batch, net.table, bank)
    alphas = attention_weights(vectors, batch.mask, net.tensors["attention.w"]).alphas.data

    full = batch.mask.all(axis=1)  # windows with two real context utterances
    for name, sel in (("context-dependent", full & flags), ("self-contained", full & ~flags)):
        print(f"  {name:<18} mean weights [t-2, t-1, t] = {np.round(alphas[sel].mean(axis=0), 3)}")
    print()
