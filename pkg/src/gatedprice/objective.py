"""Joint gate/regressor objectives.

Two families are provided.  The *hard* losses use the 0/1 gate decision
and are what gets reported.  The *soft* losses replace the gate decision
in the gated squared error and the positive-fraction hinge with the
classifier probability, which makes them differentiable in both models.
In threshold mode the cross-entropy labels (``|y - pred| <= epsilon``) are
recomputed from the current predictions but treated as constants, so the
cross-entropy term sends no gradient into the regressor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .types import GatedPriceError, ObjectiveConfig

PROB_CLAMP = 1e-7


class EmptyBatch(GatedPriceError):
    pass


def indicator_c1(score: float) -> int:
    """Gate decision: 0 below 0.5, 1 otherwise (0.5 itself is positive)."""
    return 0 if score < 0.5 else 1


def indicator_c2(y: float, pred: float, epsilon: float) -> int:
    """Accuracy label: 0 when the absolute error exceeds epsilon, else 1."""
    return 0 if abs(y - pred) > epsilon else 1


def gate(scores) -> np.ndarray:
    """Vectorized :func:`indicator_c1`."""
    return (np.asarray(scores, dtype=np.float64) >= 0.5).astype(np.float64)


def accuracy_labels(y, preds, epsilon) -> np.ndarray:
    """Vectorized :func:`indicator_c2`."""
    err = np.abs(np.asarray(y, dtype=np.float64) - np.asarray(preds, dtype=np.float64))
    return (err <= epsilon).astype(np.float64)


def _prep(scores, preds, y):
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    p = np.asarray(preds, dtype=np.float64).reshape(-1)
    t = np.asarray(y, dtype=np.float64).reshape(-1)
    if s.size == 0:
        raise EmptyBatch("loss of an empty batch")
    if not (s.shape == p.shape == t.shape):
        raise ValueError("scores, predictions and targets must have equal length")
    return s, p, t


def _cross_entropy(s, labels):
    sc = np.clip(s, PROB_CLAMP, 1.0 - PROB_CLAMP)
    return -labels * np.log(sc) - (1.0 - labels) * np.log1p(-sc)


def percentile_loss_hard(scores, preds, y, cfg: ObjectiveConfig) -> float:
    s, p, t = _prep(scores, preds, y)
    c1 = gate(s)
    return float(np.mean(c1 * (t - p) ** 2) + cfg.beta * max(0.0, cfg.delta - np.mean(c1)))


def threshold_loss_hard(scores, preds, y, cfg: ObjectiveConfig) -> float:
    s, p, t = _prep(scores, preds, y)
    c1 = gate(s)
    c2 = accuracy_labels(t, p, cfg.epsilon)
    return float(np.mean(c1 * (t - p) ** 2)
                 + cfg.beta * max(0.0, cfg.delta - np.mean(c1))
                 + cfg.gamma * np.mean(_cross_entropy(s, c2)))


def _gated_terms(s, p, t, cfg, gate_override):
    n = s.size
    r = t - p
    w = np.ones_like(s) if gate_override else s
    mean_w = float(np.mean(w))
    active = mean_w < cfg.delta
    loss = float(np.mean(w * r * r)) + cfg.beta * max(0.0, cfg.delta - mean_w)
    d_pred = -2.0 * w * r / n
    if gate_override:
        d_score = np.zeros_like(s)
    else:
        d_score = r * r / n - (cfg.beta / n if active else 0.0)
    return loss, d_score, d_pred


def percentile_loss_soft(scores, preds, y, cfg: ObjectiveConfig, gate_override: bool = False):
    """Relaxed percentile objective.

    Returns ``(loss, dloss/dscores, dloss/dpreds)``.  With
    ``gate_override`` every sample is treated as gated in, which is how the
    warm-up stage trains the regressor on all rows.
    """
    s, p, t = _prep(scores, preds, y)
    return _gated_terms(s, p, t, cfg, gate_override)


def threshold_loss_soft(scores, preds, y, cfg: ObjectiveConfig, gate_override: bool = False):
    s, p, t = _prep(scores, preds, y)
    loss, d_score, d_pred = _gated_terms(s, p, t, cfg, gate_override)
    if cfg.gamma:
        n = s.size
        c2 = accuracy_labels(t, p, cfg.epsilon)
        sc = np.clip(s, PROB_CLAMP, 1.0 - PROB_CLAMP)
        loss += cfg.gamma * float(np.mean(_cross_entropy(s, c2)))
        d_score = d_score + cfg.gamma * (sc - c2) / (n * sc * (1.0 - sc))
    return loss, d_score, d_pred


def hard_loss(scores, preds, y, cfg: ObjectiveConfig) -> float:
    if cfg.mode == "percentile":
        return percentile_loss_hard(scores, preds, y, cfg)
    return threshold_loss_hard(scores, preds, y, cfg)


def soft_loss(scores, preds, y, cfg: ObjectiveConfig, gate_override: bool = False):
    if cfg.mode == "percentile":
        return percentile_loss_soft(scores, preds, y, cfg, gate_override)
    return threshold_loss_soft(scores, preds, y, cfg, gate_override)


@dataclass
class BatchEval:
    scores: np.ndarray
    preds: np.ndarray
    y: np.ndarray
    c1: np.ndarray
    c2: np.ndarray | None
    hard_loss: float
    soft_loss: float


def evaluate_batch(scores, preds, y, cfg: ObjectiveConfig) -> BatchEval:
    s, p, t = _prep(scores, preds, y)
    c2 = accuracy_labels(t, p, cfg.epsilon) if cfg.mode == "threshold" else None
    return BatchEval(s, p, t, gate(s), c2, hard_loss(s, p, t, cfg), soft_loss(s, p, t, cfg)[0])
