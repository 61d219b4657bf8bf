import csv
import os

import pytest

from dacontext.cli import main
from dacontext.training import read_metrics

GRAMMAR = "train_conversations=8\nvalidation_conversations=3\ntest_conversations=3\n"
RUN = ("corpus=data\nmodel=RNN_INPUT_ATTENTION\ncell=GRU\nn_context=1\nout_dir=runs/a\nembedding_dim=6\n"
       "hidden_size=4\nfeature_maps=3\nepochs=2\nmini_batch_size=8\n")


@pytest.fixture
def workspace(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    (tmp_path / "g.txt").write_text(GRAMMAR, encoding="utf-8")
    (tmp_path / "run.txt").write_text(RUN, encoding="utf-8")
    assert main(["gen-synth", "--grammar", "g.txt", "--seed", "1", "--out", "data"]) == 0
    return tmp_path


def test_gen_synth_writes_splits_and_ceiling(workspace):
    assert sorted(os.listdir(workspace / "data")) == ["synth.meta", "test.tsv", "train.tsv", "validation.tsv"]
    meta = (workspace / "data" / "synth.meta").read_text().splitlines()
    assert "context_free_ceiling=0.8" in meta


def test_train_then_eval(workspace, capsys):
    assert main(["train", "--config", "run.txt"]) == 0
    run = workspace / "runs" / "a"
    assert sorted(os.listdir(run)) == ["checkpoint.dcn", "config.txt", "metrics.csv", "summary.txt"]
    records = read_metrics(run / "metrics.csv")
    assert records[-1].split == "test"
    capsys.readouterr()
    assert main(["eval", "--checkpoint", str(run / "checkpoint.dcn"), "--corpus", "data", "--split", "test"]) == 0
    printed = capsys.readouterr().out
    assert f"accuracy={records[-1].accuracy:.4f}" in printed
    with open(run / "confusion_test.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["gold", "predicted", "count"] and len(rows) == 1 + 16


def test_retrain_is_byte_identical(workspace):
    assert main(["train", "--config", "run.txt"]) == 0
    first = (workspace / "runs/a/metrics.csv").read_bytes()
    assert main(["train", "--config", "run.txt"]) == 0
    assert (workspace / "runs/a/metrics.csv").read_bytes() == first
    assert [p for p in os.listdir(workspace / "runs") if p.startswith(".")] == []


def test_sweep_table(workspace, capsys):
    assert main(["sweep", "--config", "run.txt", "--n-from", "0", "--n-to", "1", "--out", "sw"]) == 0
    with open(workspace / "sw" / "sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["n_context"] for r in rows] == ["0", "1"]
    assert (workspace / "sw" / "n1" / "checkpoint.dcn").exists()


def test_majority_baseline(workspace, capsys):
    assert main(["eval", "--corpus", "data", "--split", "test", "--majority"]) == 0
    assert capsys.readouterr().out.startswith("majority accuracy=")


@pytest.mark.parametrize("argv,code,category", [
    (["train", "--config", "missing.txt"], 3, "io"),
    (["sweep", "--config", "run.txt", "--n-from", "3", "--n-to", "1"], 2, "config"),
    (["eval", "--checkpoint", "run.txt", "--corpus", "data"], 4, "format"),
])
def test_error_exit_codes(workspace, capsys, argv, code, category):
    assert main(argv) == code
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith(f"error: {category}: ")


def test_corrupt_corpus_is_a_format_error(workspace, capsys):
    with open(workspace / "data" / "train.tsv", "a") as fh:
        fh.write("oops\n")
    assert main(["train", "--config", "run.txt"]) == 4
    assert not (workspace / "runs").exists() or not os.listdir(workspace / "runs")


def test_eval_on_validation_reproduces_training_record(workspace, capsys):
    assert main(["train", "--config", "run.txt"]) == 0
    summary = dict(l.split("=", 1) for l in (workspace / "runs/a/summary.txt").read_text().splitlines())
    capsys.readouterr()
    assert main(["eval", "--checkpoint", "runs/a/checkpoint.dcn", "--corpus", "data/validation.tsv",
                 "--split", "validation"]) == 0
    assert f"accuracy={float(summary['validation_accuracy']):.4f}" in capsys.readouterr().out


def test_unambiguous_grammar_has_ceiling_one(workspace):
    (workspace / "g0.txt").write_text(GRAMMAR + "ambiguity_rate=0\n", encoding="utf-8")
    assert main(["gen-synth", "--grammar", "g0.txt", "--seed", "0", "--out", "d0"]) == 0
    assert "context_free_ceiling=1.0" in (workspace / "d0" / "synth.meta").read_text().splitlines()


def test_missing_corpus_leaves_no_run_directory(workspace, capsys):
    os.remove(workspace / "data" / "validation.tsv")
    assert main(["train", "--config", "run.txt"]) == 3
    assert capsys.readouterr().err.startswith("error: io: ")
    assert not (workspace / "runs").exists()


def test_sweep_one_to_three_has_three_rows(workspace, capsys):
    assert main(["sweep", "--config", "run.txt", "--n-from", "1", "--n-to", "3", "--out", "sw"]) == 0
    lines = (workspace / "sw" / "sweep.csv").read_text().splitlines()
    assert lines[0] == "n_context,validation_accuracy,test_accuracy" and len(lines) == 4
