"""Published test accuracies (%) on MRDA and SwDA, used as reporting targets only."""

from __future__ import annotations

from .context_models import ContextModelConfig, ModelKind

# (kind, cell) -> (MRDA, SwDA)
BY_MODEL = {
    (ModelKind.BASELINE_I, None): (83.6, 71.3),
    (ModelKind.BASELINE_II, None): (83.5, 72.6),
    (ModelKind.MAX, None): (58.5, 48.0),
    (ModelKind.ATTENTION, None): (83.5, 72.4),
    (ModelKind.RNN, "LSTM"): (83.8, 73.1),
    (ModelKind.RNN, "GRU"): (83.8, 72.8),
    (ModelKind.RNN_OUTPUT_ATTENTION, "LSTM"): (84.1, 73.8),
    (ModelKind.RNN_OUTPUT_ATTENTION, "GRU"): (84.0, 73.1),
    (ModelKind.RNN_INPUT_ATTENTION, "LSTM"): (84.3, 73.3),
    (ModelKind.RNN_INPUT_ATTENTION, "GRU"): (83.6, 73.1),
}

# context length -> (MRDA, SwDA), best model per dataset
BY_CONTEXT = {1: (83.8, 73.1), 2: (83.9, 73.8), 3: (84.3, 73.5), 4: (84.0, 73.1), 5: (84.0, 72.9)}

MAJORITY_CLASS = {"mrda": 59.1, "swda": 33.7}
BEST_CONTEXT = {"mrda": 3, "swda": 2}
BEST_MODEL = {
    "mrda": ContextModelConfig(ModelKind.RNN_INPUT_ATTENTION, "LSTM", 3),
    "swda": ContextModelConfig(ModelKind.RNN_OUTPUT_ATTENTION, "LSTM", 2),
}

_COLUMN = {"mrda": 0, "swda": 1}


def model_target(dataset: str, config: ContextModelConfig) -> float | None:
    col = _COLUMN.get(dataset.lower())
    if col is None:
        return None
    key = (config.kind, config.cell.value if config.cell else None)
    row = BY_MODEL.get(key)
    return None if row is None else row[col]


def context_target(dataset: str, n: int) -> float | None:
    col = _COLUMN.get(dataset.lower())
    row = BY_CONTEXT.get(n)
    return None if col is None or row is None else row[col]
