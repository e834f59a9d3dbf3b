"""From raw transactions to model inputs.

Generates a synthetic marketplace, trims price outliers, shows why prices
are modelled on a log scale, builds the historical statistics index on the
training rows and assembles the per-listing input vectors.
"""

import numpy as np

from gatedprice import data
from gatedprice.synth import SynthConfig, generate

corpus = generate(SynthConfig(n=20000, seed=0))
table = corpus.table
print(f"{len(table)} listings, {table.d_v} visual features, "
      f"{corpus.qualified.mean():.1%} of them truly qualified")

trimmed = data.trim_outliers(table, 0.05)
print(f"after trimming 5% of extreme prices: {len(trimmed)} rows")

y = trimmed.log_prices()
print(f"skewness of raw prices {data.skewness(np.exp(y)):+.3f}, of log prices {data.skewness(y):+.3f}")

train_rows, val_rows, test_rows = data.split(list(range(len(trimmed))), [0.8, 0.1, 0.1], seed=0)
train_table = trimmed.take(train_rows)
index = data.build_stat_index(train_table)

# A seller never seen in training falls back to the global statistics.
known = data.lookup_stats(index, int(train_table.category_id[0]), train_table.seller_id[0])
unknown = data.lookup_stats(index, int(train_table.category_id[0]), "no-such-seller")
print("stats for a known seller:  ", np.round(known.to_array(), 3))
print("stats for an unknown seller:", np.round(unknown.to_array(), 3))

X, y_train = data.stack_examples(data.assemble(train_table, index))
print(f"training matrix {X.shape}: {table.d_v} visual + {X.shape[1] - table.d_v} statistical columns")
