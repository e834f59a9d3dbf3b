"""Domain types shared across the package."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

N_STATS = 12
N_CATEGORIES = 13


class GatedPriceError(ValueError):
    """Base class for validation failures."""


class NonPositivePrice(GatedPriceError):
    pass


class BadCategory(GatedPriceError):
    pass


class DimensionMismatch(GatedPriceError):
    pass


class EmptyInput(GatedPriceError):
    pass


class DegenerateInput(GatedPriceError):
    pass


@dataclass(frozen=True)
class StatFeatures:
    """Historical log-price quartiles and means at three aggregation levels."""

    global_q1: float
    global_q2: float
    global_q3: float
    global_mean: float
    category_q1: float
    category_q2: float
    category_q3: float
    category_mean: float
    seller_q1: float
    seller_q2: float
    seller_q3: float
    seller_mean: float

    def to_array(self) -> np.ndarray:
        return np.array(
            [
                self.global_q1, self.global_q2, self.global_q3, self.global_mean,
                self.category_q1, self.category_q2, self.category_q3, self.category_mean,
                self.seller_q1, self.seller_q2, self.seller_q3, self.seller_mean,
            ],
            dtype=np.float64,
        )

    @classmethod
    def from_groups(cls, glob, cat, sel) -> "StatFeatures":
        return cls(*glob, *cat, *sel)


@dataclass(frozen=True)
class ListingExample:
    item_id: str
    seller_id: str
    category_id: int
    sold_price: float
    log_price: float
    visual_features: np.ndarray
    stat_features: np.ndarray
    input: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, item_id, seller_id, category_id, sold_price, visual_features, stat_features):
        if not sold_price > 0:
            raise NonPositivePrice(f"sold_price must be > 0, got {sold_price!r}")
        v = np.asarray(visual_features, dtype=np.float64)
        s = np.asarray(stat_features, dtype=np.float64)
        return cls(
            item_id=str(item_id),
            seller_id=str(seller_id),
            category_id=int(category_id),
            sold_price=float(sold_price),
            log_price=math.log(sold_price),
            visual_features=v,
            stat_features=s,
            input=np.concatenate([v, s]),
        )


def validate_example(e: ListingExample) -> None:
    """Raise the first violated invariant of ``e``; return None when valid."""
    if not (e.sold_price > 0 and math.isfinite(e.sold_price)):
        raise NonPositivePrice(f"{e.item_id}: sold_price must be positive, got {e.sold_price!r}")
    expected = math.log(e.sold_price)
    if abs(e.log_price - expected) > 1e-12 * max(1.0, abs(expected)):
        raise NonPositivePrice(f"{e.item_id}: log_price {e.log_price!r} != ln(sold_price) {expected!r}")
    if not 1 <= e.category_id <= N_CATEGORIES:
        raise BadCategory(f"{e.item_id}: category_id {e.category_id} outside 1..{N_CATEGORIES}")
    d_v = len(e.visual_features)
    if len(e.stat_features) != N_STATS:
        raise DimensionMismatch(f"{e.item_id}: expected {N_STATS} stat features, got {len(e.stat_features)}")
    if len(e.input) != d_v + N_STATS:
        raise DimensionMismatch(
            f"{e.item_id}: input length {len(e.input)} != visual {d_v} + {N_STATS} stats"
        )
    if not (np.array_equal(e.input[:d_v], e.visual_features) and np.array_equal(e.input[d_v:], e.stat_features)):
        raise DimensionMismatch(f"{e.item_id}: input is not visual features followed by stats")


@dataclass(frozen=True)
class ObjectiveConfig:
    """Constants of the joint objective.

    ``delta`` is the minimum fraction of positives, ``beta`` weights the
    hinge on that fraction, ``gamma`` scales the cross-entropy term and
    ``epsilon`` is the log-price error bound (the last two apply to
    threshold mode only).
    """

    mode: str = "percentile"
    delta: float = 0.5
    beta: float = 1.0
    gamma: float = 1.0
    epsilon: float = 0.5

    def __post_init__(self):
        if self.mode not in ("percentile", "threshold"):
            raise ValueError(f"mode must be 'percentile' or 'threshold', got {self.mode!r}")
        if not 0 < self.delta <= 1:
            raise ValueError(f"delta must lie in (0, 1], got {self.delta}")
        if self.beta < 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")

    @classmethod
    def percentile(cls, delta=0.5, beta=1.0):
        return cls(mode="percentile", delta=delta, beta=beta)

    @classmethod
    def threshold(cls, epsilon, delta=0.1, beta=1.0, gamma=1.0):
        return cls(mode="threshold", delta=delta, beta=beta, gamma=gamma, epsilon=epsilon)


@dataclass(frozen=True)
class GateReport:
    n_total: int
    n_positive: int
    positive_fraction: float
    male: Optional[float]
    rmsle: Optional[float]

    def __post_init__(self):
        assert 0 <= self.n_positive <= self.n_total
        if self.n_positive:
            assert self.male is not None and self.rmsle is not None
            assert self.rmsle >= self.male - 1e-12
