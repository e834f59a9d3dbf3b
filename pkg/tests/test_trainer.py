import numpy as np
import pytest

from gatedprice.data import assemble, build_stat_index, stack_examples
from gatedprice.synth import SynthConfig, generate
from gatedprice.trainer import (
    DESK_SCHEDULE,
    BadMagic,
    BadSchedule,
    ChecksumMismatch,
    NonFiniteLoss,
    Phase,
    TrainConfig,
    VersionMismatch,
    checkpoint_bytes,
    format_epoch_log,
    init_models,
    load_checkpoint,
    make_schedule,
    parse_checkpoint,
    save_checkpoint,
    train,
    train_no_warmup,
)
from gatedprice.types import ObjectiveConfig

TINY = (Phase("warmup", 0.003, 2), Phase("joint", 0.003, 3))


def test_full_schedule_boundaries():
    sched = make_schedule(TrainConfig.full(ObjectiveConfig.percentile()))
    assert len(sched) == 1700 + 850 + 3400 + 1700
    assert sched[0] == (0, "warmup", 0.0005)
    assert sched[1699] == (1699, "warmup", 0.0005)
    assert sched[1700] == (1700, "warmup", 0.0002)
    assert sched[2550] == (2550, "joint", 0.0005)
    assert sched[5950] == (5950, "joint", 0.0002)
    assert TrainConfig.full(ObjectiveConfig.percentile()).batch_size == 4096


def test_warmup_only_schedule():
    cfg = TrainConfig(schedule=(Phase("warmup", 0.001, 3), Phase("joint", 0.001, 0)))
    assert [s for _, s, _ in make_schedule(cfg)] == ["warmup"] * 3


@pytest.mark.parametrize("schedule", [(), (Phase("other", 0.1, 1),), (Phase("joint", 0.0, 1),),
                                      (Phase("joint", 0.1, -1),)])
def test_bad_schedule(schedule):
    with pytest.raises(BadSchedule):
        make_schedule(TrainConfig(schedule=schedule))


def test_no_warmup_keeps_budget():
    cfg = TrainConfig(schedule=DESK_SCHEDULE)
    a, b = make_schedule(cfg), make_schedule(cfg.without_warmup())
    assert len(a) == len(b)
    assert [lr for *_, lr in a] == [lr for *_, lr in b]
    assert {s for _, s, _ in b} == {"joint"}


def test_training_reduces_error_on_clean_data():
    corpus = generate(SynthConfig(n=3000, d_v=8, n_quality_dims=2, noise_fraction=0.0, seed=1))
    t = corpus.table
    tr, va = t.take(range(2400)), t.take(range(2400, 3000))
    idx = build_stat_index(tr)
    ex_tr, ex_va = assemble(tr, idx), assemble(va, idx)
    cfg = TrainConfig(ObjectiveConfig.percentile(0.5), batch_size=128,
                      schedule=(Phase("warmup", 0.003, 8), Phase("joint", 0.003, 4)))
    res = train(ex_tr, cfg, ex_va)
    _, y_tr = stack_examples(ex_tr)
    X_va, y_va = stack_examples(ex_va)
    baseline = np.mean(np.abs(y_va - y_tr.mean()))
    _, preds = res.checkpoint.outputs(X_va)
    assert np.mean(np.abs(preds - y_va)) < 0.5 * baseline
    losses = [r.train_loss for r in res.log if r.stage == "warmup"]
    assert np.mean(losses[len(losses) // 2:]) < np.mean(losses[:len(losses) // 2])


def test_same_seed_same_trajectory(small_split):
    idx, tr, te = small_split
    cfg = TrainConfig(ObjectiveConfig.threshold(0.4), batch_size=64, schedule=TINY, seed=5)
    a = train(tr, cfg, te, idx)
    b = train(tr, cfg, te, idx)
    assert format_epoch_log(a.log) == format_epoch_log(b.log)
    assert checkpoint_bytes(a.checkpoint) == checkpoint_bytes(b.checkpoint)
    c = train(tr, TrainConfig(ObjectiveConfig.threshold(0.4), batch_size=64, schedule=TINY, seed=6), te, idx)
    assert format_epoch_log(a.log) != format_epoch_log(c.log)


def test_zero_budget_returns_initial_models(small_split):
    _, tr, _ = small_split
    cfg = TrainConfig(schedule=(Phase("warmup", 0.001, 0), Phase("joint", 0.001, 0)), seed=2)
    res = train_no_warmup(tr, cfg)
    _, y = stack_examples(tr)
    cls0, reg0 = init_models(cfg, len(tr[0].input), float(np.mean(y)))
    for a, b in zip(cls0.params() + reg0.params(), res.checkpoint.classifier.params() + res.checkpoint.regressor.params()):
        np.testing.assert_array_equal(a, b)
    assert res.log == []


def test_log_reports_hard_gate_fraction(small_split):
    idx, tr, te = small_split
    res = train(tr, TrainConfig(ObjectiveConfig.percentile(0.5), batch_size=64, schedule=TINY), te, idx)
    X, _ = stack_examples(te)
    scores, _ = res.checkpoint.outputs(X)
    assert res.final.val_positive_fraction == np.mean(scores >= 0.5)
    text = format_epoch_log(res.log)
    assert text.splitlines()[1] == "epoch,stage,lr,train_loss,val_loss,val_positive_fraction,val_male,val_rmsle"
    assert all(np.isfinite(r.train_loss) and np.isfinite(r.val_loss) for r in res.log)


def test_non_finite_loss_aborts(small_split):
    _, tr, _ = small_split
    bad = list(tr)
    e = bad[0]
    bad[0] = type(e)(e.item_id, e.seller_id, e.category_id, e.sold_price, float("nan"),
                     e.visual_features, e.stat_features, e.input)
    with pytest.raises(NonFiniteLoss):
        train(bad, TrainConfig(batch_size=64, schedule=TINY, standardize=False))


# -- checkpoint file --------------------------------------------------------

@pytest.fixture(scope="module")
def trained(small_split):
    idx, tr, te = small_split
    res = train(tr, TrainConfig(ObjectiveConfig.threshold(0.5), batch_size=64, schedule=TINY), te, idx)
    return res.checkpoint, te


def test_checkpoint_round_trip(trained, tmp_path):
    ckpt, te = trained
    path = tmp_path / "m.gprc"
    crc = save_checkpoint(ckpt, path)
    back = load_checkpoint(path)
    assert back.crc == crc
    X, _ = stack_examples(te[:100])
    s0, p0 = ckpt.outputs(X)
    s1, p1 = back.outputs(X)
    np.testing.assert_allclose(s1, s0, rtol=1e-5, atol=1e-6)
    np.testing.assert_allclose(p1, p0, rtol=1e-5, atol=1e-5)
    assert back.stat_index == ckpt.stat_index
    assert back.config == ckpt.config
    np.testing.assert_array_equal(back.input_mean, ckpt.input_mean)
    assert back.adam_regressor.t == ckpt.adam_regressor.t
    # the float32 copy reproduces itself exactly
    assert checkpoint_bytes(back) == path.read_bytes()


def test_checkpoint_layout(trained):
    ckpt, _ = trained
    data = checkpoint_bytes(ckpt)
    assert data.startswith(b"GPRC1\nformat_version=1\n")
    head = data[: data.index(b"\n\n")].decode()
    for key in ("mode=threshold", "epsilon=0.5", "classifier_dims=", "input_mean=", "d_v=8"):
        assert key in head


def test_truncated_checkpoint(trained):
    data = checkpoint_bytes(trained[0])
    with pytest.raises(ChecksumMismatch):
        parse_checkpoint(data[:-10])
    with pytest.raises(ChecksumMismatch):
        parse_checkpoint(data[:8])


def test_flipped_byte(trained):
    data = bytearray(checkpoint_bytes(trained[0]))
    data[len(data) // 2] ^= 0xFF
    with pytest.raises(ChecksumMismatch):
        parse_checkpoint(bytes(data))


def test_bad_magic(trained):
    data = checkpoint_bytes(trained[0])
    with pytest.raises(BadMagic):
        parse_checkpoint(b"XXXXX\n" + data[6:])


def test_version_mismatch(trained):
    import zlib
    data = checkpoint_bytes(trained[0])[:-4].replace(b"format_version=1", b"format_version=9", 1)
    data += (zlib.crc32(data) & 0xFFFFFFFF).to_bytes(4, "little")
    with pytest.raises(VersionMismatch):
        parse_checkpoint(data)

