import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dacontext.corpus import (OOV, PAD, CorpusFormatError, Vocabulary, batch_iterator, default_max_len,
                              load_corpus, load_corpus_dir, majority_class_accuracy, make_context_windows,
                              write_corpus_file)

from conftest import make_corpus


def write(path, rows):
    path.write_text("".join("\t".join(r) + "\n" for r in rows), encoding="utf-8")
    return str(path)


def test_load_groups_conversations_and_lowercases(tmp_path):
    train = write(tmp_path / "train.tsv", [("c1", "A", "s", "Hello World"), ("c1", "B", "b", "uh-huh"),
                                           ("c2", "A", "q", "why")])
    corpus = load_corpus({"train": train})
    convs = corpus.split("train")
    assert [c.id for c in convs] == ["c1", "c2"]
    assert convs[0].utterances[0].tokens == ("hello", "world")
    assert corpus.labels.names == ["s", "b", "q"]
    assert corpus.vocabulary.itos[:2] == ["<pad>", "<oov>"]


def test_comments_and_blank_lines_skipped(tmp_path):
    p = tmp_path / "train.tsv"
    p.write_text("# header\n\nc1\tA\ts\thi\n", encoding="utf-8")
    assert len(load_corpus({"train": str(p)}).utterances("train")) == 1


@pytest.mark.parametrize("line,reason", [
    ("c1\tA\ts", "4 tab-separated"),
    ("c1\tA\ts\t   ", "no tokens"),
    ("\tA\ts\thi", "conversation id"),
])
def test_malformed_lines_report_location(tmp_path, line, reason):
    p = tmp_path / "train.tsv"
    p.write_text("c0\tA\ts\tok\n" + line + "\n", encoding="utf-8")
    with pytest.raises(CorpusFormatError) as err:
        load_corpus({"train": str(p)})
    assert err.value.line == 2 and reason in str(err.value)


def test_non_contiguous_conversation(tmp_path):
    train = write(tmp_path / "t.tsv", [("c1", "A", "s", "a"), ("c2", "A", "s", "b"), ("c1", "A", "s", "c")])
    with pytest.raises(CorpusFormatError, match="contiguous"):
        load_corpus({"train": train})


def test_unknown_label_outside_train_and_oov_tokens(tmp_path):
    train = write(tmp_path / "train.tsv", [("c1", "A", "s", "a b")])
    test = write(tmp_path / "test.tsv", [("c9", "A", "s", "a zzz")])
    corpus = load_corpus({"train": train, "test": test})
    assert corpus.vocabulary.encode(["a", "zzz"])[1] == OOV
    bad = write(tmp_path / "bad.tsv", [("c9", "A", "new", "a")])
    with pytest.raises(CorpusFormatError, match="unknown label"):
        load_corpus({"train": train, "test": bad})


def test_conversation_ids_must_be_disjoint(tmp_path):
    train = write(tmp_path / "train.tsv", [("c1", "A", "s", "a")])
    test = write(tmp_path / "test.tsv", [("c1", "A", "s", "a")])
    with pytest.raises(CorpusFormatError, match="also appears"):
        load_corpus({"train": train, "test": test})


def test_round_trip_through_writer(tmp_path):
    corpus = make_corpus({"train": [[("a b", "x"), ("c", "y")]], "test": [[("b", "y")]]})
    for s in ("train", "test"):
        write_corpus_file(tmp_path / f"{s}.tsv", corpus.split(s), corpus.labels)
    again = load_corpus_dir(tmp_path)
    assert again.vocabulary == corpus.vocabulary and again.labels == corpus.labels
    assert again.split("test")[0].utterances == corpus.split("test")[0].utterances


def test_context_windows_pad_at_conversation_start():
    corpus = make_corpus({"train": [[("a", "x"), ("b", "y"), ("c", "x")]]})
    w = make_context_windows(corpus, "train", 2)
    assert [x.pad_count for x in w] == [2, 1, 0]
    assert w[2].context[0].tokens == ("a",) and w[2].current.tokens == ("c",)
    assert all(x.n == 2 for x in w)
    assert [x.context for x in make_context_windows(corpus, "train", 0)] == [(), (), ()]


def test_majority_class():
    corpus = make_corpus({"train": [[("a", "x"), ("b", "x"), ("c", "y")]], "test": [[("a", "y"), ("a", "x")]]})
    assert majority_class_accuracy(corpus, "train") == pytest.approx(2 / 3)
    assert majority_class_accuracy(corpus, "test") == 0.5


def test_default_max_len_percentile():
    corpus = make_corpus({"train": [[(" ".join(["w"] * k), "x") for k in range(1, 101)]]})
    assert default_max_len(corpus) == 96


def test_vocabulary_reserved_indices():
    v = Vocabulary(["x"])
    assert v.stoi["<pad>"] == PAD and v.stoi["<oov>"] == OOV
    assert v.decode(v.encode(["x", "q"])) == ["x", "<oov>"]


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 60), st.integers(1, 17), st.integers(0, 5), st.integers(0, 3))
def test_batches_partition_items_deterministically(n, size, seed, epoch):
    items = list(range(n))
    batches = list(batch_iterator(items, size, shuffle_seed=seed, epoch=epoch))
    assert sorted(x for b in batches for x in b) == items
    assert all(len(b) == size for b in batches[:-1])
    assert batches == list(batch_iterator(items, size, shuffle_seed=seed, epoch=epoch))


def test_unshuffled_batches_keep_order():
    assert list(batch_iterator([1, 2, 3], 2)) == [[1, 2], [3]]
    with pytest.raises(ValueError):
        list(batch_iterator([1], 0))
