"""How the constraint trades coverage against accuracy.

Sweeping delta in percentile mode moves the accepted fraction directly.
Sweeping the error tolerance epsilon in threshold mode lets the gate decide
how many items it can price within that tolerance: looser tolerances admit
more items at a higher average error.
"""

from gatedprice import data
from gatedprice.evaluate import format_rows_table, sweep
from gatedprice.synth import SynthConfig, generate
from gatedprice.trainer import TrainConfig
from gatedprice.types import ObjectiveConfig

corpus = generate(SynthConfig(n=20000, seed=0))
table = data.trim_outliers(corpus.table, 0.05)
tr, va, te = (table.take(p) for p in data.split(list(range(len(table))), [0.8, 0.1, 0.1], seed=0))
index = data.build_stat_index(tr)
train_ex, val_ex, test_ex = (data.assemble(t, index) for t in (tr, va, te))

pct = sweep(train_ex, TrainConfig(ObjectiveConfig.percentile(0.5)), [0.3, 0.5, 0.7],
            evaluation=test_ex, validation=val_ex, stat_index=index)
print(format_rows_table(pct, "percentile"))

thr = sweep(train_ex, TrainConfig(ObjectiveConfig.threshold(0.3)), [0.3, 0.5, 0.7],
            evaluation=test_ex, validation=val_ex, stat_index=index)
print(format_rows_table(thr, "epsilon"))
