"""Train a gate that keeps roughly half of the listings.

The percentile objective asks the classifier to accept a fraction delta of
items while the regressor only pays for errors on the accepted ones.  After
training we compare the accepted subset with the regressor's error on all
items, check how well the gate recovers the hidden quality labels, and
round-trip the checkpoint through disk.
"""

import tempfile
from pathlib import Path

from gatedprice import data
from gatedprice.evaluate import all_items_male, gate_auc, gate_report
from gatedprice.synth import SynthConfig, generate
from gatedprice.trainer import TrainConfig, load_checkpoint, save_checkpoint, train
from gatedprice.types import ObjectiveConfig

corpus = generate(SynthConfig(n=20000, seed=0))
table = data.trim_outliers(corpus.table, 0.05)
tr, va, te = (table.take(p) for p in data.split(list(range(len(table))), [0.8, 0.1, 0.1], seed=0))
index = data.build_stat_index(tr)
train_ex, val_ex, test_ex = (data.assemble(t, index) for t in (tr, va, te))

cfg = TrainConfig(objective=ObjectiveConfig.percentile(0.5), seed=0)
result = train(train_ex, cfg, val_ex, index)
ckpt = result.checkpoint

rep = gate_report(ckpt, test_ex)
print(f"accepted {rep.n_positive}/{rep.n_total} test items ({rep.positive_fraction:.1%})")
print(f"MALE on accepted items {rep.male:.4f}, RMSLE {rep.rmsle:.4f}")
print(f"MALE of the regressor on every item {all_items_male(ckpt, test_ex):.4f}")

truth = {i: q for i, q in zip(corpus.table.item_id, corpus.qualified)}
print(f"gate AUC against the hidden quality labels {gate_auc(ckpt, test_ex, truth):.3f}")

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "model.gprc"
    save_checkpoint(ckpt, path)
    again = gate_report(load_checkpoint(path), test_ex)
    print(f"checkpoint {ckpt.model_version}: reloaded model accepts {again.n_positive} items")
