"""Log-error metrics and gate summaries."""

from __future__ import annotations

import math

import numpy as np

from .types import EmptyInput, GateReport, NonPositivePrice


def _log_pair(pred_prices, sold_prices):
    p_hat = np.asarray(pred_prices, dtype=np.float64).reshape(-1)
    p = np.asarray(sold_prices, dtype=np.float64).reshape(-1)
    if p_hat.size == 0 or p.size == 0:
        raise EmptyInput("metric over an empty set")
    if p_hat.shape != p.shape:
        raise ValueError(f"length mismatch: {p_hat.size} predictions vs {p.size} prices")
    if np.any(p_hat <= 0) or np.any(p <= 0):
        raise NonPositivePrice("prices must be positive")
    return np.log(p_hat), np.log(p)


def male(pred_prices, sold_prices) -> float:
    """Mean absolute log error."""
    a, b = _log_pair(pred_prices, sold_prices)
    return float(np.mean(np.abs(a - b)))


def rmsle(pred_prices, sold_prices) -> float:
    """Root mean squared log error."""
    a, b = _log_pair(pred_prices, sold_prices)
    return float(math.sqrt(np.mean((a - b) ** 2)))


def male_log(pred_log, true_log) -> float:
    d = np.asarray(pred_log, dtype=np.float64) - np.asarray(true_log, dtype=np.float64)
    if d.size == 0:
        raise EmptyInput("metric over an empty set")
    return float(np.mean(np.abs(d)))


def rmsle_log(pred_log, true_log) -> float:
    d = np.asarray(pred_log, dtype=np.float64) - np.asarray(true_log, dtype=np.float64)
    if d.size == 0:
        raise EmptyInput("metric over an empty set")
    return float(math.sqrt(np.mean(d * d)))


def report_from_outputs(scores, pred_log, true_log) -> GateReport:
    """Gate with ``score >= 0.5`` and score the accepted rows only.

    Metrics are ``None`` when nothing is accepted.
    """
    scores = np.asarray(scores, dtype=np.float64)
    n = scores.size
    if n == 0:
        raise EmptyInput("gate report over an empty set")
    pos = scores >= 0.5
    k = int(pos.sum())
    if k == 0:
        return GateReport(n, 0, 0.0, None, None)
    pl = np.asarray(pred_log)[pos]
    tl = np.asarray(true_log)[pos]
    return GateReport(n, k, k / n, male_log(pl, tl), rmsle_log(pl, tl))


def gate_auc(scores, truth) -> float:
    """Rank-based ROC AUC with averaged ranks for ties."""
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    t = np.asarray(truth).astype(bool).reshape(-1)
    n_pos, n_neg = int(t.sum()), int((~t).sum())
    if n_pos == 0 or n_neg == 0:
        raise DegenerateTruth("AUC needs both qualified and unqualified rows")
    order = np.argsort(s, kind="mergesort")
    sorted_s = s[order]
    ranks = np.empty(s.size, dtype=np.float64)
    i = 0
    while i < s.size:
        j = i
        while j + 1 < s.size and sorted_s[j + 1] == sorted_s[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return float((ranks[t].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


class DegenerateTruth(EmptyInput):
    pass
