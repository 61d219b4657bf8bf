import numpy as np
import pytest

from dacontext.corpus import Conversation, Corpus, LabelSet, Utterance, Vocabulary

ACCEPTANCE_LINES: list[str] = []  # filled by test_acceptance.py


def make_corpus(convs_by_split: dict[str, list[list[tuple[str, str]]]]) -> Corpus:
    """Tiny corpus from ``{split: [[(text, label), ...], ...]}``."""
    labels = LabelSet()
    splits = {}
    for split, convs in convs_by_split.items():
        out = []
        for ci, conv in enumerate(convs):
            utts = tuple(
                Utterance(tuple(text.split()), labels.add(lab), "AB"[i % 2]) for i, (text, lab) in enumerate(conv)
            )
            out.append(Conversation(f"{split}-{ci}", utts))
        splits[split] = out
    return Corpus(splits, Vocabulary.build(splits["train"]), labels)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
