"""Gate reports, constraint sweeps and the warm-up ablation."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import List, Optional, Sequence

import numpy as np

from .data import stack_examples
from .metrics import gate_auc as _auc
from .metrics import report_from_outputs
from .trainer import Checkpoint, TrainConfig, train, train_no_warmup
from .types import GateReport


def gate_report(checkpoint: Checkpoint, examples) -> GateReport:
    """Hard-gate every example, then score the accepted ones.

    ``examples`` must be assembled with the checkpoint's statistics index.
    """
    X, y = stack_examples(examples)
    scores, preds = checkpoint.outputs(X)
    return report_from_outputs(scores, preds, y)


def all_items_male(checkpoint: Checkpoint, examples) -> float:
    """MALE of the regressor over every example, ignoring the gate."""
    X, y = stack_examples(examples)
    _, preds = checkpoint.outputs(X)
    return float(np.mean(np.abs(preds - y)))


def gate_auc(checkpoint: Checkpoint, examples, truth_flags) -> float:
    """AUC of classifier scores against ground-truth qualified flags.

    ``truth_flags`` is either a sequence aligned with ``examples`` or a
    mapping from item id to flag (as read from a truth sidecar).
    """
    X, _ = stack_examples(examples)
    scores, _ = checkpoint.outputs(X)
    if isinstance(truth_flags, dict):
        truth = np.array([bool(truth_flags[e.item_id]) for e in examples])
    else:
        truth = np.asarray(truth_flags, dtype=bool)
    return _auc(scores, truth)


@dataclass(frozen=True)
class SweepRow:
    constraint: float
    n_positive: int
    positive_fraction: float
    male: Optional[float]
    rmsle: Optional[float]


SWEEP_HEADER = "constraint,n_positive,positive_fraction,male,rmsle"


def _with_constraint(cfg: TrainConfig, value: float) -> TrainConfig:
    obj = cfg.objective
    obj = replace(obj, delta=value) if obj.mode == "percentile" else replace(obj, epsilon=value)
    return replace(cfg, objective=obj)


def sweep(examples, cfg: TrainConfig, values: Sequence[float], evaluation=None,
          validation=None, stat_index=None) -> List[SweepRow]:
    """Train once per constraint value (delta or epsilon, by mode) and report.

    Every run shares ``cfg.seed``.  Rows are scored on ``evaluation`` when
    given, else on the training examples.
    """
    values = [float(v) for v in values]
    if values != sorted(values):
        raise ValueError("sweep values must be sorted ascending")
    rows = []
    target = evaluation if evaluation else examples
    for v in values:
        res = train(examples, _with_constraint(cfg, v), validation, stat_index)
        rep = gate_report(res.checkpoint, target)
        rows.append(SweepRow(v, rep.n_positive, rep.positive_fraction, rep.male, rep.rmsle))
    return rows


def format_rows_csv(rows: Sequence[SweepRow]) -> str:
    def num(v):
        return "" if v is None else repr(float(v))

    lines = [SWEEP_HEADER]
    lines += [f"{num(r.constraint)},{r.n_positive},{num(r.positive_fraction)},{num(r.male)},{num(r.rmsle)}"
              for r in rows]
    return "\n".join(lines) + "\n"


def format_rows_table(rows: Sequence[SweepRow], label: str = "constraint") -> str:
    """Rows become columns, one column per constraint value."""

    def cell(v, fmt):
        return "-" if v is None else format(v, fmt)

    table = [
        [label] + [cell(r.constraint, "g") for r in rows],
        ["# positive items"] + [str(r.n_positive) for r in rows],
        ["% positive items"] + [cell(100 * r.positive_fraction, ".2f") + "%" for r in rows],
        ["MALE"] + [cell(r.male, ".4f") for r in rows],
        ["RMSLE"] + [cell(r.rmsle, ".4f") for r in rows],
    ]
    widths = [max(len(row[i]) for row in table) for i in range(len(table[0]))]
    return "\n".join("  ".join(c.rjust(w) if i else c.ljust(w) for i, (c, w) in enumerate(zip(row, widths)))
                     for row in table) + "\n"


@dataclass(frozen=True)
class AblationPair:
    seed: int
    warmup: GateReport
    no_warmup: GateReport


def warmup_ablation(examples, cfg: TrainConfig, seeds: Sequence[int], evaluation=None,
                    validation=None, stat_index=None) -> List[AblationPair]:
    """Paired runs with and without the warm-up stage, same seed and epoch budget."""
    target = evaluation if evaluation else examples
    out = []
    for seed in seeds:
        c = replace(cfg, seed=seed)
        with_w = train(examples, c, validation, stat_index).checkpoint
        without = train_no_warmup(examples, c, validation, stat_index).checkpoint
        out.append(AblationPair(seed, gate_report(with_w, target), gate_report(without, target)))
    return out
