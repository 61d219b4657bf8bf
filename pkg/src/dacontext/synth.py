"""Synthetic dialogs whose ambiguous utterances can only be labelled from context.

Each conversation has ``conversation_length`` utterances. A fixed number
``ambiguity_rate * conversation_length`` of them, never the first and never
two in a row, are ambiguous: their words carry no label information and their
label is ``rule[previous label]``. Every other utterance draws its label
uniformly and contains words specific to that label.

Because an ambiguous utterance always follows an unambiguous one, its
predecessor's label is uniform over the label set, so a classifier that sees
only the current utterance can do no better than::

    (1 - a) + a * max_r |{l : rule[l] == r}| / n_labels
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from math import ceil

import numpy as np

from .corpus import Conversation, Corpus, LabelSet, Utterance, Vocabulary

AMBIGUOUS_WORDS = ("right", "uh-huh", "yeah")


class GrammarConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GrammarConfig:
    n_labels: int = 4
    ambiguity_rate: float = 0.4
    conversation_length: int = 10
    rule: tuple[int, ...] | None = None  # previous label -> resolved label; default l % 2
    train_conversations: int = 500
    validation_conversations: int = 100
    test_conversations: int = 100
    signature_words: int = 3
    filler_words: int = 20

    def resolved_rule(self) -> tuple[int, ...]:
        if self.rule is None:
            return tuple(l % 2 for l in range(self.n_labels))
        return tuple(self.rule)

    @property
    def ambiguous_per_conversation(self) -> int:
        return int(round(self.ambiguity_rate * self.conversation_length))

    def validate(self) -> None:
        if self.n_labels < 2:
            raise GrammarConfigError("n_labels must be at least 2")
        if not 0.0 <= self.ambiguity_rate <= 1.0:
            raise GrammarConfigError(f"ambiguity_rate must lie in [0, 1], got {self.ambiguity_rate}")
        if self.conversation_length < 1:
            raise GrammarConfigError("conversation_length must be positive")
        k = self.ambiguity_rate * self.conversation_length
        if abs(k - round(k)) > 1e-9:
            raise GrammarConfigError(
                "ambiguity_rate * conversation_length must be an integer "
                f"({self.ambiguity_rate} * {self.conversation_length} = {k})")
        room = ceil((self.conversation_length - 1) / 2)
        if round(k) > room:
            raise GrammarConfigError(
                f"{round(k)} non-adjacent ambiguous slots do not fit in {self.conversation_length - 1} positions")
        rule = self.resolved_rule()
        if len(rule) != self.n_labels or any(not 0 <= r < self.n_labels for r in rule):
            raise GrammarConfigError(f"rule must map each of {self.n_labels} labels to a label, got {rule}")
        for name in ("train_conversations", "validation_conversations", "test_conversations"):
            if getattr(self, name) < 1:
                raise GrammarConfigError(f"{name} must be positive")
        if self.signature_words < 1 or self.filler_words < 1:
            raise GrammarConfigError("signature_words and filler_words must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["rule"] = list(self.resolved_rule())
        return d


def context_free_ceiling(config: GrammarConfig) -> float:
    rule = config.resolved_rule()
    share = int(np.bincount(rule, minlength=config.n_labels).max()) / config.n_labels
    a = config.ambiguity_rate
    return (1.0 - a) + a * share


@dataclass
class SynthCorpus:
    corpus: Corpus
    ceiling: float
    config: GrammarConfig
    ambiguous: dict[str, list[list[bool]]] = field(default_factory=dict)


def _ambiguous_slots(rng: np.random.Generator, length: int, k: int) -> list[int]:
    # uniform over k-subsets of 1..length-1 with no two adjacent
    if k == 0:
        return []
    picks = np.sort(rng.choice(length - 1 - k + 1, size=k, replace=False))
    return [int(c) + i + 1 for i, c in enumerate(picks)]


def _conversation(rng, cfg: GrammarConfig, rule, conv_id: str):
    T = cfg.conversation_length
    slots = set(_ambiguous_slots(rng, T, cfg.ambiguous_per_conversation))
    utts, flags, prev = [], [], None
    for t in range(T):
        filler = [f"f{j}" for j in rng.integers(0, cfg.filler_words, size=rng.integers(0, 3))]
        if t in slots:
            label = rule[prev]
            words = [AMBIGUOUS_WORDS[rng.integers(len(AMBIGUOUS_WORDS))]] + filler
        else:
            label = int(rng.integers(cfg.n_labels))
            n_sig = int(rng.integers(1, 3))
            words = [f"w{label}_{j}" for j in rng.integers(0, cfg.signature_words, size=n_sig)] + filler
        rng.shuffle(words)
        utts.append(Utterance(tuple(words), label, "AB"[t % 2]))
        flags.append(t in slots)
        prev = label
    return Conversation(conv_id, tuple(utts)), flags


def synth_grammar(config: GrammarConfig, seed: int) -> SynthCorpus:
    config.validate()
    rule = config.resolved_rule()
    rng = np.random.default_rng(seed)
    labels = LabelSet([f"da{l}" for l in range(config.n_labels)])
    splits, ambiguous = {}, {}
    sizes = {
        "train": config.train_conversations,
        "validation": config.validation_conversations,
        "test": config.test_conversations,
    }
    for split, count in sizes.items():
        convs, flags = [], []
        for i in range(count):
            conv, f = _conversation(rng, config, rule, f"{split}-{i:05d}")
            convs.append(conv)
            flags.append(f)
        splits[split] = convs
        ambiguous[split] = flags
    corpus = Corpus(splits=splits, vocabulary=Vocabulary.build(splits["train"]), labels=labels)
    return SynthCorpus(corpus, context_free_ceiling(config), config, ambiguous)
