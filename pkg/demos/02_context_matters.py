"""Why context helps, on a corpus built so that it must.

The grammar draws dialog acts at random, except that some utterances are
backchannel-like ("uh-huh", "yeah") and their label is fixed by the label of the
utterance before. No model that looks at one utterance alone can beat the
analytic ceiling, while a model reading the previous utterances can.

    python3 demos/02_context_matters.py        # about a minute on one core
"""

from dacontext.context_models import ContextModelConfig
from dacontext.corpus import majority_class_accuracy
from dacontext.synth import GrammarConfig, synth_grammar
from dacontext.training import Hyperparameters, evaluate, train

synth = synth_grammar(GrammarConfig(), seed=0)
corpus = synth.corpus

conv = corpus.split("train")[0]
flags = synth.ambiguous["train"][0]
print("first training conversation (* marks context-dependent labels):")
for u, amb in zip(conv.utterances, flags):
    print(f"  {'*' if amb else ' '} {corpus.labels.names[u.label_id]:<4} {' '.join(u.tokens)}")

print(f"\nmajority class accuracy : {majority_class_accuracy(corpus, 'test'):.3f}")
print(f"context-free ceiling    : {synth.ceiling:.3f}")

hyper = Hyperparameters(embedding_dim=32, hidden_size=32, mini_batch_size=10, epochs=10,
                        init_scale=0.1, rnn_init_scale=0.2)
for config in (ContextModelConfig("BASELINE_I"), ContextModelConfig("RNN", "GRU", 2),
               ContextModelConfig("RNN_OUTPUT_ATTENTION", "GRU", 2)):
    result = train(corpus, config, hyper)
    acc = evaluate(result.state, corpus, "test").accuracy
    print(f"{config.label:<28} n={config.n_context}  test accuracy {acc:.3f}  (best epoch {result.best_epoch})")
