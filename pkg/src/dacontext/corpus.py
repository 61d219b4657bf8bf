"""Dialog corpora: loading, vocabularies, label sets, context windows, batching.

Corpus files hold one utterance per line with four tab-separated fields::

    conversation_id<TAB>speaker<TAB>label<TAB>space separated tokens

Lines of one conversation are contiguous. ``#`` starts a comment line and
blank lines are skipped.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

import numpy as np

SPLITS = ("train", "validation", "test")
PAD, OOV = 0, 1
PAD_TOKEN, OOV_TOKEN = "<pad>", "<oov>"


class CorpusFormatError(ValueError):
    def __init__(self, path, line: int | None, reason: str):
        self.path, self.line, self.reason = str(path), line, reason
        where = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{where}: {reason}")


@dataclass(frozen=True)
class Utterance:
    tokens: tuple[str, ...]
    label_id: int
    speaker: str = ""


@dataclass(frozen=True)
class Conversation:
    id: str
    utterances: tuple[Utterance, ...]

    def __post_init__(self):
        if not self.utterances:
            raise ValueError(f"conversation {self.id!r} is empty")

    def __len__(self) -> int:
        return len(self.utterances)


class Vocabulary:
    """Token to index map with 0 reserved for padding and 1 for unknown words."""

    def __init__(self, tokens: Sequence[str] = ()):
        self.itos: list[str] = [PAD_TOKEN, OOV_TOKEN]
        self.stoi: dict[str, int] = {PAD_TOKEN: PAD, OOV_TOKEN: OOV}
        for tok in tokens:
            self.add(tok)

    def add(self, token: str) -> int:
        if token not in self.stoi:
            self.stoi[token] = len(self.itos)
            self.itos.append(token)
        return self.stoi[token]

    @classmethod
    def build(cls, conversations: Sequence[Conversation]) -> "Vocabulary":
        vocab = cls()
        for conv in conversations:
            for utt in conv.utterances:
                for tok in utt.tokens:
                    vocab.add(tok)
        return vocab

    def encode(self, tokens: Sequence[str]) -> list[int]:
        return [self.stoi.get(t, OOV) for t in tokens]

    def decode(self, ids: Sequence[int]) -> list[str]:
        return [self.itos[i] for i in ids]

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, token: str) -> bool:
        return token in self.stoi

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.itos == other.itos


class LabelSet:
    def __init__(self, names: Sequence[str] = ()):
        self.names: list[str] = []
        self.index: dict[str, int] = {}
        for name in names:
            self.add(name)

    def add(self, name: str) -> int:
        if name not in self.index:
            self.index[name] = len(self.names)
            self.names.append(name)
        return self.index[name]

    def __len__(self) -> int:
        return len(self.names)

    def __contains__(self, name: str) -> bool:
        return name in self.index

    def __eq__(self, other) -> bool:
        return isinstance(other, LabelSet) and self.names == other.names


@dataclass
class Corpus:
    splits: dict[str, list[Conversation]]
    vocabulary: Vocabulary
    labels: LabelSet

    def utterances(self, split: str) -> list[Utterance]:
        return [u for conv in self.split(split) for u in conv.utterances]

    def split(self, name: str) -> list[Conversation]:
        if name not in self.splits:
            raise KeyError(f"corpus has no split {name!r} (available: {sorted(self.splits)})")
        return self.splits[name]

    def label_counts(self, split: str) -> np.ndarray:
        counts = np.zeros(len(self.labels), dtype=np.int64)
        for u in self.utterances(split):
            counts[u.label_id] += 1
        return counts

    def stats(self) -> dict[str, dict[str, int]]:
        """Per split: conversations, utterances, classes; plus vocabulary size."""
        out = {}
        for name, convs in self.splits.items():
            out[name] = {
                "conversations": len(convs),
                "utterances": sum(len(c) for c in convs),
                "classes": int((self.label_counts(name) > 0).sum()),
            }
        out["all"] = {"classes": len(self.labels), "vocabulary": len(self.vocabulary)}
        return out


@dataclass(frozen=True)
class ContextWindow:
    current: Utterance
    context: tuple[Utterance, ...] = field(default_factory=tuple)
    pad_count: int = 0

    @property
    def n(self) -> int:
        return len(self.context) + self.pad_count

    @property
    def label(self) -> int:
        return self.current.label_id


# --------------------------------------------------------------------------
# loading
# --------------------------------------------------------------------------


def parse_corpus_file(path) -> list[tuple[str, str, str, tuple[str, ...], int]]:
    """Raw records ``(conversation_id, speaker, label, tokens, line_no)`` of one file."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 4:
                raise CorpusFormatError(path, line_no, f"expected 4 tab-separated fields, found {len(fields)}")
            conv_id, speaker, label, text = fields
            if not conv_id:
                raise CorpusFormatError(path, line_no, "empty conversation id")
            if not label:
                raise CorpusFormatError(path, line_no, "empty label")
            tokens = tuple(t.lower() for t in text.split())
            if not tokens:
                raise CorpusFormatError(path, line_no, "utterance has no tokens")
            records.append((conv_id, speaker, label, tokens, line_no))
    return records


def _group(path, records, labels: LabelSet, grow_labels: bool) -> list[Conversation]:
    convs: list[Conversation] = []
    finished: set[str] = set()
    cur_id, cur = None, []
    for conv_id, speaker, label, tokens, line_no in records:
        if label not in labels:
            if not grow_labels:
                raise CorpusFormatError(path, line_no, f"unknown label {label!r}")
            labels.add(label)
        if conv_id != cur_id:
            if cur_id is not None:
                convs.append(Conversation(cur_id, tuple(cur)))
                finished.add(cur_id)
            if conv_id in finished:
                raise CorpusFormatError(path, line_no, f"conversation {conv_id!r} is not contiguous")
            cur_id, cur = conv_id, []
        cur.append(Utterance(tokens, labels.index[label], speaker))
    if cur_id is not None:
        convs.append(Conversation(cur_id, tuple(cur)))
    return convs


def load_corpus(
    paths: Mapping[str, str | os.PathLike],
    vocabulary: Vocabulary | None = None,
    labels: LabelSet | None = None,
) -> Corpus:
    """Load split files into a :class:`Corpus`.

    Without ``vocabulary``/``labels`` both are built from the ``train`` split,
    which is then required. Labels not seen in training are an error in the
    other splits; unseen tokens map to the OOV index at encoding time.
    """
    if vocabulary is None and "train" not in paths:
        raise ValueError("a train split is required to build the vocabulary")
    grow = labels is None
    labels = LabelSet() if labels is None else labels
    splits: dict[str, list[Conversation]] = {}
    order = sorted(paths, key=lambda s: (s != "train", s))
    for split in order:
        path = paths[split]
        records = parse_corpus_file(path)
        if not records:
            raise CorpusFormatError(path, None, f"split {split!r} is empty")
        splits[split] = _group(path, records, labels, grow_labels=grow and split == "train")
    ids: dict[str, str] = {}
    for split, convs in splits.items():
        for conv in convs:
            if conv.id in ids and ids[conv.id] != split:
                raise CorpusFormatError(paths[split], None,
                                        f"conversation {conv.id!r} also appears in split {ids[conv.id]!r}")
            ids[conv.id] = split
    if vocabulary is None:
        vocabulary = Vocabulary.build(splits["train"])
    return Corpus(splits=splits, vocabulary=vocabulary, labels=labels)


def load_corpus_dir(directory, splits: Sequence[str] = SPLITS, **kwargs) -> Corpus:
    """Load ``<directory>/<split>.tsv`` for each split that exists."""
    paths = {s: os.path.join(directory, f"{s}.tsv") for s in splits}
    present = {s: p for s, p in paths.items() if os.path.exists(p)}
    if not present:
        raise FileNotFoundError(f"no split files found in {directory}")
    return load_corpus(present, **kwargs)


def write_corpus_file(path, conversations: Sequence[Conversation], labels: LabelSet) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for conv in conversations:
            for u in conv.utterances:
                fh.write(f"{conv.id}\t{u.speaker}\t{labels.names[u.label_id]}\t{' '.join(u.tokens)}\n")


# --------------------------------------------------------------------------
# windows, statistics, batching
# --------------------------------------------------------------------------


def make_context_windows(corpus: Corpus, split: str, n: int) -> list[ContextWindow]:
    if n < 0:
        raise ValueError(f"context length must be non-negative, got {n}")
    windows = []
    for conv in corpus.split(split):
        utts = conv.utterances
        for t, cur in enumerate(utts):
            ctx = utts[max(0, t - n):t]
            windows.append(ContextWindow(cur, tuple(ctx), n - len(ctx)))
    return windows


def majority_label(corpus: Corpus) -> int:
    """Most frequent training label; ties go to the lowest index."""
    return int(np.argmax(corpus.label_counts("train")))


def majority_class_accuracy(corpus: Corpus, split: str) -> float:
    counts = corpus.label_counts(split)
    total = counts.sum()
    if total == 0:
        raise ValueError(f"split {split!r} is empty")
    return float(counts[majority_label(corpus)] / total)


def batch_iterator(items: Sequence, batch_size: int, shuffle_seed: int | None = None,
                   epoch: int = 0) -> Iterator[list]:
    """Yield consecutive batches; the final partial batch is kept.

    With ``shuffle_seed`` the order is a permutation that depends only on
    ``(shuffle_seed, epoch)``.
    """
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    order = np.arange(len(items))
    if shuffle_seed is not None:
        order = np.random.default_rng([shuffle_seed, epoch]).permutation(len(items))
    for start in range(0, len(items), batch_size):
        yield [items[i] for i in order[start:start + batch_size]]


def utterance_lengths(corpus: Corpus, split: str = "train") -> np.ndarray:
    return np.array([len(u.tokens) for u in corpus.utterances(split)], dtype=np.int64)


def default_max_len(corpus: Corpus, percentile: float = 96.0) -> int:
    """Padding length covering ``percentile`` percent of training utterances."""
    lengths = utterance_lengths(corpus, "train")
    return max(1, int(np.percentile(lengths, percentile, method="inverted_cdf")))
