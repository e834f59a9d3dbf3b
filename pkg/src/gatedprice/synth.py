"""Synthetic marketplace with a planted unqualified subpopulation.

Each listing has a latent clarity ``c``.  Qualified listings have ``c`` in
(0, 1) and a log price that is linear in the content features, with noise
that grows as clarity drops.  Unqualified listings have ``c`` in (-1, 0)
and a log price drawn from the same marginal but independent of their
content features, so the only way to spot them is through the quality
descriptors.  The last ``n_quality_dims`` visual features are noisy
readings of ``c``; the rest are content features.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import TransactionTable, format_transactions
from .types import GatedPriceError


class BadConfig(GatedPriceError):
    pass


@dataclass(frozen=True)
class SynthConfig:
    n: int = 20000
    d_v: int = 32
    n_categories: int = 13
    n_sellers: int = 200
    noise_fraction: float = 0.3
    noise_sigma: float = 0.1
    seed: int = 0
    n_quality_dims: int = 4
    quality_noise: float = 0.3
    base_log_price: float = 4.0
    category_spread: float = 0.2
    seller_spread: float = 0.1

    def validate(self):
        if self.n < 1:
            raise BadConfig(f"n must be >= 1, got {self.n}")
        if self.d_v < 1:
            raise BadConfig(f"d_v must be >= 1, got {self.d_v}")
        if not 0 <= self.n_quality_dims < self.d_v:
            raise BadConfig("n_quality_dims must leave at least one content dimension")
        if self.n_categories < 1 or self.n_sellers < 1:
            raise BadConfig("need at least one category and one seller")
        if not 0 <= self.noise_fraction <= 1:
            raise BadConfig(f"noise_fraction must lie in [0, 1], got {self.noise_fraction}")
        if not self.noise_sigma > 0:
            raise BadConfig(f"noise_sigma must be > 0, got {self.noise_sigma}")


@dataclass
class SynthCorpus:
    table: TransactionTable
    qualified: np.ndarray  # bool, ground truth; never a training input
    clarity: np.ndarray

    def truth_csv(self) -> str:
        lines = ["item_id,qualified"]
        lines += [f"{i},{int(q)}" for i, q in zip(self.table.item_id, self.qualified)]
        return "\n".join(lines) + "\n"

    def write(self, out_dir, name="synth"):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / f"{name}.csv"
        truth_path = out / f"{name}.truth.csv"
        csv_path.write_bytes(format_transactions(self.table).encode("utf-8"))
        truth_path.write_bytes(self.truth_csv().encode("utf-8"))
        return csv_path, truth_path


def read_truth(path) -> dict:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != "item_id,qualified":
        raise BadConfig(f"{path}: header must be item_id,qualified")
    out = {}
    for line in lines[1:]:
        item, flag = line.rsplit(",", 1)
        out[item] = flag == "1"
    return out


def generate(cfg: SynthConfig) -> SynthCorpus:
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    d_c = cfg.d_v - cfg.n_quality_dims

    # hidden ground truth, drawn once per seed
    w = rng.standard_normal(d_c)
    w /= np.linalg.norm(w)
    b_cat = rng.normal(0.0, cfg.category_spread, cfg.n_categories)
    u_seller = rng.normal(0.0, cfg.seller_spread, cfg.n_sellers)
    zipf = 1.0 / np.arange(1, cfg.n_sellers + 1)
    zipf /= zipf.sum()

    n = cfg.n
    n_unqualified = int(round(cfg.noise_fraction * n))
    qualified = np.ones(n, dtype=bool)
    qualified[rng.permutation(n)[:n_unqualified]] = False

    category = rng.integers(1, cfg.n_categories + 1, size=n)
    seller = rng.choice(cfg.n_sellers, size=n, p=zipf)
    clarity = np.where(qualified, rng.uniform(0.0, 1.0, n), rng.uniform(-1.0, 0.0, n))
    content = rng.standard_normal((n, d_c))
    detached = rng.standard_normal((n, d_c))
    quality = clarity[:, None] + cfg.quality_noise * rng.standard_normal((n, cfg.n_quality_dims))

    sigma = cfg.noise_sigma * (1.0 + 3.0 * (1.0 - np.clip(clarity, 0.0, 1.0)))
    signal = np.where(qualified, content @ w, detached @ w)
    log_price = (cfg.base_log_price + signal + b_cat[category - 1] + u_seller[seller]
                 + sigma * rng.standard_normal(n))

    table = TransactionTable(
        item_id=[f"item{i:06d}" for i in range(n)],
        seller_id=[f"s{k:04d}" for k in seller],
        category_id=category,
        sold_price=np.exp(log_price),
        visual_features=np.hstack([content, quality]),
    )
    return SynthCorpus(table=table, qualified=qualified, clarity=clarity)
