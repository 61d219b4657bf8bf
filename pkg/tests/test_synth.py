import itertools
from fractions import Fraction

import numpy as np
import pytest

from dacontext.synth import AMBIGUOUS_WORDS, GrammarConfig, GrammarConfigError, context_free_ceiling, synth_grammar


def enumerated_ceiling(K, T, k, rule):
    """Best context-free accuracy by exhaustive enumeration.

    Without context a classifier sees signature words at unambiguous slots
    (label identified exactly) and uninformative words at ambiguous ones.
    """
    slot_sets = [s for s in itertools.combinations(range(1, T), k)
                 if all(b - a > 1 for a, b in zip(s, s[1:]))]
    amb_counts = [Fraction(0)] * K
    correct = total = Fraction(0)
    for slots in slot_sets:
        free = [t for t in range(T) if t not in slots]
        for labels in itertools.product(range(K), repeat=len(free)):
            seq = dict(zip(free, labels))
            for t in sorted(slots):
                seq[t] = rule[seq[t - 1]]
            p = Fraction(1, len(slot_sets) * K ** len(free))
            for t in slots:
                amb_counts[seq[t]] += p
            correct += p * (T - k)
            total += p * T
    correct += max(amb_counts)
    return correct / total


@pytest.mark.parametrize("K,T,a,rule", [
    (2, 5, 0.4, (0, 1)),
    (4, 5, 0.4, (0, 1, 0, 1)),
    (3, 5, 0.4, (0, 0, 1)),
    (3, 6, 0.5, (2, 2, 2)),
])
def test_ceiling_matches_enumeration(K, T, a, rule):
    cfg = GrammarConfig(n_labels=K, conversation_length=T, ambiguity_rate=a, rule=rule)
    assert context_free_ceiling(cfg) == pytest.approx(float(enumerated_ceiling(K, T, round(a * T), rule)), abs=1e-12)


def test_default_ceiling_is_point_eight():
    assert context_free_ceiling(GrammarConfig()) == pytest.approx(0.8, abs=1e-12)


def test_generated_corpus_follows_grammar():
    cfg = GrammarConfig(train_conversations=200)
    synth = synth_grammar(cfg, seed=3)
    rule = cfg.resolved_rule()
    for conv, flags in zip(synth.corpus.split("train"), synth.ambiguous["train"]):
        assert len(conv) == 10 and sum(flags) == 4 and not flags[0]
        assert not any(a and b for a, b in zip(flags, flags[1:]))
        for t, (u, amb) in enumerate(zip(conv.utterances, flags)):
            if amb:
                assert u.label_id == rule[conv.utterances[t - 1].label_id]
                assert any(w in AMBIGUOUS_WORDS for w in u.tokens)
            else:
                assert any(w.startswith(f"w{u.label_id}_") for w in u.tokens)


def test_context_free_oracle_reaches_ceiling_not_more():
    synth = synth_grammar(GrammarConfig(train_conversations=2000), seed=0)
    utts = synth.corpus.utterances("train")
    # knows every signature word; guesses label 0 when none is present
    hits = 0
    for u in utts:
        sig = [w for w in u.tokens if w.startswith("w")]
        guess = int(sig[0][1:].split("_")[0]) if sig else 0
        hits += guess == u.label_id
    assert abs(hits / len(utts) - 0.8) < 0.01


def test_same_seed_same_corpus():
    a = synth_grammar(GrammarConfig(), 7).corpus
    b = synth_grammar(GrammarConfig(), 7).corpus
    assert a.split("test") == b.split("test")
    assert a.split("test") != synth_grammar(GrammarConfig(), 8).corpus.split("test")


@pytest.mark.parametrize("kw", [
    {"ambiguity_rate": 0.35},
    {"ambiguity_rate": 0.6},
    {"n_labels": 1},
    {"rule": (0, 5, 0, 1)},
])
def test_invalid_grammar(kw):
    with pytest.raises(GrammarConfigError):
        synth_grammar(GrammarConfig(**kw), 0)
