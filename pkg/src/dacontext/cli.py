"""Command line: ``train``, ``eval``, ``sweep`` and ``gen-synth``.

Failures print one line ``error: <category>: <detail>`` to stderr and exit
with 2 (config), 3 (io), 4 (data format) or 5 (numeric).
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import shutil
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import reference
from .checkpoint import CheckpointFormatError, load_checkpoint, save_checkpoint
from .config import RunConfig, load_grammar_config, load_run_config
from .context_models import ConfigError
from .corpus import SPLITS, CorpusFormatError, LabelSet, load_corpus, load_corpus_dir, majority_class_accuracy, \
    write_corpus_file
from .embeddings import EmbeddingFormatError, load_pretrained
from .synth import GrammarConfigError, synth_grammar
from .tensor import NonFiniteError
from .training import evaluate, train, write_metrics, MetricRecord

log = logging.getLogger("dacontext")

EXIT_CONFIG, EXIT_IO, EXIT_FORMAT, EXIT_NUMERIC = 2, 3, 4, 5

CHECKPOINT = "checkpoint.dcn"
METRICS = "metrics.csv"
CONFIG = "config.txt"
SUMMARY = "summary.txt"


class CliError(Exception):
    def __init__(self, code: int, category: str, detail: str):
        super().__init__(detail)
        self.code, self.category, self.detail = code, category, detail


def _classify(exc: BaseException) -> CliError:
    if isinstance(exc, CliError):
        return exc
    if isinstance(exc, (CorpusFormatError, EmbeddingFormatError, CheckpointFormatError)):
        return CliError(EXIT_FORMAT, "format", str(exc))
    if isinstance(exc, NonFiniteError):
        return CliError(EXIT_NUMERIC, "numeric", str(exc))
    if isinstance(exc, (ConfigError, GrammarConfigError)):
        return CliError(EXIT_CONFIG, "config", str(exc))
    if isinstance(exc, OSError):
        return CliError(EXIT_IO, "io", f"{exc.strerror or exc}: {exc.filename}" if exc.filename else str(exc))
    if isinstance(exc, (ValueError, KeyError)):
        return CliError(EXIT_CONFIG, "config", str(exc))
    raise exc


# --------------------------------------------------------------------------
# train
# --------------------------------------------------------------------------


def run_training(cfg: RunConfig) -> dict[str, str]:
    """Train per ``cfg`` and write the run directory atomically. Returns the summary."""
    corpus = load_corpus(cfg.paths)
    embeddings = None
    if cfg.embeddings:
        embeddings = load_pretrained(cfg.embeddings, corpus.vocabulary, cfg.hyper.embedding_dim,
                                     cfg.hyper.embedding_scale, cfg.hyper.seed)
        log.info("pretrained vectors cover %.1f%% of the vocabulary", 100 * embeddings.coverage)
    result = train(corpus, cfg.model, cfg.hyper, embeddings)
    best = result.state
    history = list(result.history)
    summary = {
        "model": cfg.model.label,
        "n_context": str(cfg.model.n_context),
        "best_epoch": str(result.best_epoch),
        "validation_accuracy": repr(result.best_accuracy),
    }
    if "test" in corpus.splits:
        res = evaluate(best, corpus, "test")
        history.append(MetricRecord(result.best_epoch, "test", res.accuracy, res.loss))
        summary["test_accuracy"] = repr(res.accuracy)
    target = reference.model_target(cfg.dataset, cfg.model)
    if target is not None:
        summary["reference_test_accuracy"] = f"{target}"

    out = Path(cfg.out_dir)
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{out.name}.", dir=out.parent))
    try:
        resolved = RunConfig(cfg.paths, cfg.model, cfg.hyper, cfg.out_dir, cfg.embeddings, cfg.dataset)
        resolved.hyper.max_len = best.max_len
        resolved.write(tmp / CONFIG)
        save_checkpoint(tmp / CHECKPOINT, best, {"best_epoch": str(result.best_epoch)})
        write_metrics(tmp / METRICS, history)
        with open(tmp / SUMMARY, "w", encoding="utf-8") as fh:
            for k, v in summary.items():
                fh.write(f"{k}={v}\n")
        if out.exists():
            shutil.rmtree(out)
        os.replace(tmp, out)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    return summary


def cmd_train(args) -> int:
    cfg = load_run_config(args.config)
    if args.out:
        cfg.out_dir = str(Path(args.out).resolve())
    summary = run_training(cfg)
    line = f"{summary['model']}: validation {float(summary['validation_accuracy']):.4f}"
    if "test_accuracy" in summary:
        line += f", test {float(summary['test_accuracy']):.4f}"
    if "reference_test_accuracy" in summary:
        line += f" (reference {summary['reference_test_accuracy']}%)"
    print(line)
    print(f"run directory: {cfg.out_dir}")
    return 0


# --------------------------------------------------------------------------
# eval
# --------------------------------------------------------------------------


def _split_path(corpus: str, split: str) -> str:
    return os.path.join(corpus, f"{split}.tsv") if os.path.isdir(corpus) else corpus


def cmd_eval(args) -> int:
    if args.majority:
        if not os.path.isdir(args.corpus):
            raise CliError(EXIT_CONFIG, "config", "--majority needs a corpus directory with train.tsv")
        corpus = load_corpus_dir(args.corpus, splits=tuple(dict.fromkeys(("train", args.split))))
        print(f"majority accuracy={majority_class_accuracy(corpus, args.split):.4f}")
        return 0
    if not args.checkpoint:
        raise CliError(EXIT_CONFIG, "config", "eval needs --checkpoint (or --majority)")
    state, _ = load_checkpoint(args.checkpoint)
    corpus = load_corpus({args.split: _split_path(args.corpus, args.split)},
                         vocabulary=state.vocabulary, labels=LabelSet(state.labels.names))
    res = evaluate(state, corpus, args.split)
    print(f"accuracy={res.accuracy:.4f}")
    out = args.confusion or os.path.join(os.path.dirname(os.path.abspath(args.checkpoint)),
                                         f"confusion_{args.split}.csv")
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["gold", "predicted", "count"])
        names = state.labels.names
        for g in range(len(names)):
            for p in range(len(names)):
                w.writerow([names[g], names[p], int(res.confusion[g, p])])
    print(f"confusion counts: {out}")
    return 0


# --------------------------------------------------------------------------
# sweep
# --------------------------------------------------------------------------


def _sweep_one(cfg: RunConfig) -> dict[str, str]:
    return run_training(cfg)


def cmd_sweep(args) -> int:
    cfg = load_run_config(args.config)
    if args.out:
        cfg.out_dir = str(Path(args.out).resolve())
    if not 0 <= args.n_from <= args.n_to <= 5:
        raise CliError(EXIT_CONFIG, "config", f"need 0 <= n-from <= n-to <= 5, got {args.n_from}..{args.n_to}")
    runs = [cfg.with_context(n, os.path.join(cfg.out_dir, f"n{n}")) for n in range(args.n_from, args.n_to + 1)]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            summaries = list(pool.map(_sweep_one, runs))
    else:
        summaries = [_sweep_one(r) for r in runs]
    header = ["n_context", "validation_accuracy", "test_accuracy"]
    with_ref = cfg.dataset in reference.BEST_CONTEXT
    if with_ref:
        header.append("reference_accuracy")
    rows = []
    for run, s in zip(runs, summaries):
        n = run.model.n_context
        row = [str(n), s["validation_accuracy"], s.get("test_accuracy", "")]
        if with_ref:
            target = reference.context_target(cfg.dataset, n)
            row.append("" if target is None else str(target))
        rows.append(row)
    Path(cfg.out_dir).mkdir(parents=True, exist_ok=True)
    table = Path(cfg.out_dir) / "sweep.csv"
    with open(table, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return 0


# --------------------------------------------------------------------------
# gen-synth
# --------------------------------------------------------------------------


def cmd_gen_synth(args) -> int:
    grammar = load_grammar_config(args.grammar)
    synth = synth_grammar(grammar, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for split in SPLITS:
        write_corpus_file(out / f"{split}.tsv", synth.corpus.splits[split], synth.corpus.labels)
    with open(out / "synth.meta", "w", encoding="utf-8") as fh:
        fh.write(f"context_free_ceiling={synth.ceiling!r}\n")
        fh.write(f"seed={args.seed}\n")
        for k, v in grammar.to_dict().items():
            if isinstance(v, list):
                v = ",".join(str(x) for x in v)
            fh.write(f"{k}={v}\n")
    print(f"wrote {out} (context-free ceiling {synth.ceiling:.4f})")
    return 0


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dacontext", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log per-epoch progress")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train one model from a config file")
    t.add_argument("--config", required=True)
    t.add_argument("--out", help="override out_dir")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint on a corpus split")
    e.add_argument("--checkpoint")
    e.add_argument("--corpus", required=True, help="corpus directory or a single split file")
    e.add_argument("--split", default="test")
    e.add_argument("--majority", action="store_true", help="report the majority-class baseline instead")
    e.add_argument("--confusion", help="where to write confusion counts")
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("sweep", help="train one model per context length")
    s.add_argument("--config", required=True)
    s.add_argument("--n-from", type=int, required=True)
    s.add_argument("--n-to", type=int, required=True)
    s.add_argument("--jobs", type=int, default=1, help="parallel training processes")
    s.add_argument("--out", help="override out_dir")
    s.set_defaults(func=cmd_sweep)

    g = sub.add_parser("gen-synth", help="write a synthetic context-dependent corpus")
    g.add_argument("--grammar", required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_synth)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001
        err = _classify(exc)
        print(f"error: {err.category}: {err.detail}", file=sys.stderr)
        return err.code


if __name__ == "__main__":
    sys.exit(main())
