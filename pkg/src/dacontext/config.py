"""Flat ``key=value`` run and grammar configuration files."""

from __future__ import annotations

import os
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .context_models import ConfigError, ContextModelConfig
from .corpus import SPLITS
from .synth import GrammarConfig
from .training import Hyperparameters, hyper_from_items, hyper_items

RUN_KEYS = {"corpus", "train", "validation", "test", "embeddings", "model", "cell", "n_context",
            "out_dir", "dataset"}


def read_items(path) -> dict[str, str]:
    items: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{line_no}: expected key=value, got {line!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            if key in items:
                raise ConfigError(f"{path}:{line_no}: duplicate key {key!r}")
            items[key] = value
    return items


@dataclass
class RunConfig:
    paths: dict[str, str]
    model: ContextModelConfig
    hyper: Hyperparameters
    out_dir: str
    embeddings: str | None = None
    dataset: str = ""

    def with_context(self, n: int, out_dir: str | None = None) -> "RunConfig":
        model = ContextModelConfig(self.model.kind, self.model.cell, n)
        return replace(self, model=model, out_dir=out_dir or self.out_dir)

    def items(self) -> list[tuple[str, str]]:
        out = [(s, self.paths[s]) for s in SPLITS if s in self.paths]
        if self.embeddings:
            out.append(("embeddings", self.embeddings))
        out += [
            ("model", self.model.kind.value),
            ("cell", self.model.cell.value if self.model.cell else ""),
            ("n_context", str(self.model.n_context)),
            ("out_dir", self.out_dir),
        ]
        if self.dataset:
            out.append(("dataset", self.dataset))
        return out + hyper_items(self.hyper)

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for k, v in self.items():
                fh.write(f"{k}={v}\n")


def parse_run_config(items: dict[str, str], base_dir: str | os.PathLike = ".") -> RunConfig:
    hyper_names = {f.name for f in fields(Hyperparameters)}
    unknown = set(items) - RUN_KEYS - hyper_names
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    base = Path(base_dir)

    def resolve(p: str) -> str:
        return str((base / p).resolve()) if p else p

    paths = {}
    if items.get("corpus"):
        for s in SPLITS:
            paths[s] = resolve(os.path.join(items["corpus"], f"{s}.tsv"))
    for s in SPLITS:
        if items.get(s):
            paths[s] = resolve(items[s])
    if "train" not in paths:
        raise ConfigError("config needs 'corpus' (a directory) or a 'train' path")
    if "model" not in items:
        raise ConfigError("config needs a 'model' key")
    try:
        hyper = hyper_from_items({k: v for k, v in items.items() if k in hyper_names})
        hyper.validate()
        n = int(items.get("n_context", "0"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    model = ContextModelConfig(items["model"], items.get("cell") or None, n)
    if "out_dir" not in items:
        raise ConfigError("config needs an 'out_dir' key")
    return RunConfig(
        paths=paths,
        model=model,
        hyper=hyper,
        out_dir=resolve(items["out_dir"]),
        embeddings=resolve(items["embeddings"]) if items.get("embeddings") else None,
        dataset=items.get("dataset", "").lower(),
    )


def load_run_config(path) -> RunConfig:
    return parse_run_config(read_items(path), Path(path).resolve().parent)


def load_grammar_config(path) -> GrammarConfig:
    items = read_items(path)
    known = {f.name: f for f in fields(GrammarConfig)}
    unknown = set(items) - set(known)
    if unknown:
        raise ConfigError(f"unknown grammar keys: {', '.join(sorted(unknown))}")
    kwargs = {}
    try:
        for k, v in items.items():
            if k == "rule":
                kwargs[k] = tuple(int(x) for x in v.split(",") if x.strip()) or None
            elif k == "ambiguity_rate":
                kwargs[k] = float(v)
            else:
                kwargs[k] = int(v)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return GrammarConfig(**kwargs)
