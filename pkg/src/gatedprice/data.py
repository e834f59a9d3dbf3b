"""Transaction ingestion, outlier trimming, historical price statistics and splits."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .types import (
    N_STATS,
    DegenerateInput,
    DimensionMismatch,
    EmptyInput,
    GatedPriceError,
    ListingExample,
    NonPositivePrice,
    StatFeatures,
)


class BadFraction(GatedPriceError):
    pass


class BadRatios(GatedPriceError):
    pass


class BadTable(GatedPriceError):
    pass


STAT_NAMES = ("q1", "q2", "q3", "mean")


@dataclass
class TransactionTable:
    """Column-oriented transaction records.

    Rows share one visual feature dimension; ``visual_features`` has shape
    ``(n, d_v)``.
    """

    item_id: List[str]
    seller_id: List[str]
    category_id: np.ndarray
    sold_price: np.ndarray
    visual_features: np.ndarray

    def __post_init__(self):
        self.item_id = [str(x) for x in self.item_id]
        self.seller_id = [str(x) for x in self.seller_id]
        self.category_id = np.asarray(self.category_id, dtype=np.int64)
        self.sold_price = np.asarray(self.sold_price, dtype=np.float64)
        self.visual_features = np.asarray(self.visual_features, dtype=np.float64)
        n = len(self.item_id)
        if self.visual_features.ndim != 2:
            self.visual_features = self.visual_features.reshape(n, -1)
        if not (len(self.seller_id) == n == len(self.category_id) == len(self.sold_price) == len(self.visual_features)):
            raise BadTable("all columns must have the same number of rows")

    def __len__(self):
        return len(self.item_id)

    @property
    def d_v(self) -> int:
        return self.visual_features.shape[1]

    def take(self, index) -> "TransactionTable":
        index = np.asarray(index, dtype=np.int64)
        return TransactionTable(
            item_id=[self.item_id[i] for i in index],
            seller_id=[self.seller_id[i] for i in index],
            category_id=self.category_id[index],
            sold_price=self.sold_price[index],
            visual_features=self.visual_features[index],
        )

    def log_prices(self) -> np.ndarray:
        if np.any(self.sold_price <= 0):
            raise NonPositivePrice("transaction table contains non-positive prices")
        return np.log(self.sold_price)


def read_transactions(path) -> TransactionTable:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:4] != ["item_id", "seller_id", "category_id", "sold_price"]:
            raise BadTable(f"{path}: header must start with item_id,seller_id,category_id,sold_price")
        d_v = len(header) - 4
        if header[4:] != [f"f{i}" for i in range(d_v)]:
            raise BadTable(f"{path}: feature columns must be f0..f{d_v - 1}")
        items, sellers, cats, prices, feats = [], [], [], [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != d_v + 4:
                raise DimensionMismatch(f"{path}:{lineno}: expected {d_v + 4} fields, got {len(row)}")
            items.append(row[0])
            sellers.append(row[1])
            cats.append(int(row[2]))
            prices.append(float(row[3]))
            feats.append([float(x) for x in row[4:]])
    return TransactionTable(items, sellers, np.array(cats, dtype=np.int64), np.array(prices),
                            np.array(feats, dtype=np.float64).reshape(len(items), d_v))


def format_transactions(t: TransactionTable) -> str:
    buf = io.StringIO()
    buf.write(",".join(["item_id", "seller_id", "category_id", "sold_price"] + [f"f{i}" for i in range(t.d_v)]))
    buf.write("\n")
    for i in range(len(t)):
        fields = [t.item_id[i], t.seller_id[i], str(int(t.category_id[i])), repr(float(t.sold_price[i]))]
        fields.extend(repr(float(x)) for x in t.visual_features[i])
        buf.write(",".join(fields))
        buf.write("\n")
    return buf.getvalue()


def write_transactions(t: TransactionTable, path) -> None:
    Path(path).write_bytes(format_transactions(t).encode("utf-8"))


def trim_outliers(t: TransactionTable, fraction: float) -> TransactionTable:
    """Drop ``floor(n * fraction / 2)`` rows from each price tail.

    Ties are broken by item id; surviving rows keep their input order.
    """
    if not 0 <= fraction < 1:
        raise BadFraction(f"fraction must lie in [0, 1), got {fraction}")
    n = len(t)
    k = int(math.floor(n * fraction / 2))
    if k == 0:
        return t.take(np.arange(n))
    order = sorted(range(n), key=lambda i: (t.sold_price[i], t.item_id[i]))
    keep = np.sort(np.array(order[k:n - k], dtype=np.int64))
    return t.take(keep)


def log_transform(price: float) -> float:
    if not price > 0:
        raise NonPositivePrice(f"price must be > 0, got {price!r}")
    return math.log(price)


def quantile(values: Sequence[float], p: float) -> float:
    """Closest-rank linear interpolation on an ascending list."""
    n = len(values)
    if n == 0:
        raise EmptyInput("quantile of an empty list")
    if not 0 <= p <= 1:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    h = (n - 1) * p
    lo = int(math.floor(h))
    if lo >= n - 1:
        return float(values[n - 1])
    return float(values[lo] + (h - lo) * (values[lo + 1] - values[lo]))


def _summary(sorted_values: np.ndarray) -> Tuple[float, float, float, float]:
    vals = sorted_values.tolist()
    return (quantile(vals, 0.25), quantile(vals, 0.5), quantile(vals, 0.75), math.fsum(vals) / len(vals))


@dataclass
class StatIndex:
    """Frozen historical statistics over log prices."""

    global_stats: Tuple[float, float, float, float]
    per_category: Dict[int, Tuple[float, float, float, float]]
    per_seller: Dict[str, Tuple[float, float, float, float]]
    built_over: str = "log_prices"

    def to_text(self) -> str:
        entries = {"built_over": self.built_over}
        for name, v in zip(STAT_NAMES, self.global_stats):
            entries[f"global.{name}"] = format(v, ".17g")
        for cat, stats in self.per_category.items():
            for name, v in zip(STAT_NAMES, stats):
                entries[f"category.{cat}.{name}"] = format(v, ".17g")
        for seller, stats in self.per_seller.items():
            for name, v in zip(STAT_NAMES, stats):
                entries[f"seller.{seller}.{name}"] = format(v, ".17g")
        return "".join(f"{k}={entries[k]}\n" for k in sorted(entries))

    @classmethod
    def from_text(cls, text: str) -> "StatIndex":
        glob: Dict[str, float] = {}
        cats: Dict[int, Dict[str, float]] = {}
        sellers: Dict[str, Dict[str, float]] = {}
        built_over = "log_prices"
        for line in text.splitlines():
            if not line:
                continue
            key, _, value = line.partition("=")
            if key == "built_over":
                built_over = value
                continue
            group, _, rest = key.partition(".")
            ident, _, stat = rest.rpartition(".")
            if stat not in STAT_NAMES:
                raise BadTable(f"unknown statistic in key {key!r}")
            if group == "global":
                glob[stat] = float(value)
            elif group == "category":
                cats.setdefault(int(ident), {})[stat] = float(value)
            elif group == "seller":
                sellers.setdefault(ident, {})[stat] = float(value)
            else:
                raise BadTable(f"unknown group in key {key!r}")
        if set(glob) != set(STAT_NAMES):
            raise BadTable("stat index is missing the global entry")

        def tup(d):
            return tuple(d[s] for s in STAT_NAMES)

        return cls(
            global_stats=tup(glob),
            per_category={k: tup(v) for k, v in cats.items()},
            per_seller={k: tup(v) for k, v in sellers.items()},
            built_over=built_over,
        )

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_text().encode("utf-8"))

    @classmethod
    def load(cls, path) -> "StatIndex":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))


def build_stat_index(t: TransactionTable) -> StatIndex:
    if len(t) == 0:
        raise EmptyInput("cannot build statistics from an empty table")
    y = t.log_prices()
    per_category: Dict[int, list] = {}
    per_seller: Dict[str, list] = {}
    for i in range(len(t)):
        per_category.setdefault(int(t.category_id[i]), []).append(y[i])
        per_seller.setdefault(t.seller_id[i], []).append(y[i])
    return StatIndex(
        global_stats=_summary(np.sort(y)),
        per_category={k: _summary(np.sort(per_category[k])) for k in sorted(per_category)},
        per_seller={k: _summary(np.sort(per_seller[k])) for k in sorted(per_seller)},
    )


def lookup_stats(idx: StatIndex, category_id, seller_id) -> StatFeatures:
    glob = idx.global_stats
    cat = idx.per_category.get(int(category_id), glob)
    sel = idx.per_seller.get(str(seller_id), glob)
    return StatFeatures.from_groups(glob, cat, sel)


def assemble(t: TransactionTable, idx: StatIndex) -> List[ListingExample]:
    """Attach looked-up statistics to every row.

    ``idx`` must come from training rows only; validation and test tables
    reuse the training index unchanged.
    """
    out = []
    for i in range(len(t)):
        stats = lookup_stats(idx, t.category_id[i], t.seller_id[i]).to_array()
        out.append(ListingExample.build(t.item_id[i], t.seller_id[i], t.category_id[i],
                                        t.sold_price[i], t.visual_features[i], stats))
    return out


def stack_examples(examples: Sequence[ListingExample]) -> Tuple[np.ndarray, np.ndarray]:
    """Return the ``(n, d)`` input matrix and the log-price vector."""
    if not examples:
        raise EmptyInput("no examples")
    d = len(examples[0].input)
    for e in examples:
        if len(e.input) != d:
            raise DimensionMismatch(f"{e.item_id}: input dim {len(e.input)} != {d}")
    X = np.stack([e.input for e in examples])
    y = np.array([e.log_price for e in examples], dtype=np.float64)
    return X, y


def split(examples: Sequence, ratios=(0.8, 0.1, 0.1), seed: int = 0):
    """Seeded shuffle then contiguous train/validation/test cut."""
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise BadRatios(f"ratios must be three non-negative numbers summing to 1, got {ratios}")
    n = len(examples)
    perm = np.random.default_rng(seed).permutation(n)
    n_train = min(n, int(round(ratios[0] * n)))
    n_val = min(n - n_train, int(round(ratios[1] * n)))
    cuts = (perm[:n_train], perm[n_train:n_train + n_val], perm[n_train + n_val:])
    return tuple([examples[i] for i in part] for part in cuts)


def skewness(values) -> float:
    """Population-moment skewness ``m3 / m2**1.5``."""
    x = np.asarray(values, dtype=np.float64)
    if x.size < 3:
        raise DegenerateInput("skewness needs at least 3 values")
    d = x - x.mean()
    m2 = np.mean(d ** 2)
    if m2 == 0:
        raise DegenerateInput("skewness of a constant sample")
    return float(np.mean(d ** 3) / m2 ** 1.5)


__all__ = [
    "N_STATS", "BadFraction", "BadRatios", "BadTable", "StatIndex", "TransactionTable",
    "assemble", "build_stat_index", "format_transactions", "log_transform", "lookup_stats",
    "quantile", "read_transactions", "skewness", "split", "stack_examples", "trim_outliers",
    "write_transactions",
]
