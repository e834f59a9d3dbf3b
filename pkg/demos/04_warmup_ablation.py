"""Does the regressor warm-up stage pay off?

Each seed trains twice with the same epoch budget: once with the warm-up
stage (regressor fitted to every item first, gate still learning its
auxiliary term) and once with the gate active from the start.
"""

import statistics

from gatedprice import data
from gatedprice.evaluate import warmup_ablation
from gatedprice.synth import SynthConfig, generate
from gatedprice.trainer import TrainConfig
from gatedprice.types import ObjectiveConfig

SEEDS = range(3)

corpus = generate(SynthConfig(n=20000, seed=0))
table = data.trim_outliers(corpus.table, 0.05)
tr, va, te = (table.take(p) for p in data.split(list(range(len(table))), [0.8, 0.1, 0.1], seed=0))
index = data.build_stat_index(tr)
train_ex, val_ex, test_ex = (data.assemble(t, index) for t in (tr, va, te))

pairs = warmup_ablation(train_ex, TrainConfig(ObjectiveConfig.percentile(0.5)), SEEDS,
                        evaluation=test_ex, validation=val_ex, stat_index=index)
for p in pairs:
    print(f"seed {p.seed}: MALE {p.warmup.male:.4f} with warm-up, {p.no_warmup.male:.4f} without")
print(f"mean: {statistics.fmean(p.warmup.male for p in pairs):.4f} vs "
      f"{statistics.fmean(p.no_warmup.male for p in pairs):.4f}")
