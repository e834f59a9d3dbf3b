import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gatedprice.objective import (
    EmptyBatch,
    evaluate_batch,
    indicator_c1,
    indicator_c2,
    percentile_loss_hard,
    percentile_loss_soft,
    threshold_loss_hard,
    threshold_loss_soft,
)
from gatedprice.types import ObjectiveConfig

LN2 = math.log(2.0)


def test_c1_boundaries():
    assert indicator_c1(0.49) == 0
    assert indicator_c1(0.5) == 1
    assert indicator_c1(0.99) == 1


def test_c2_boundaries():
    assert indicator_c2(0.0, 0.6, 0.5) == 0
    assert indicator_c2(0.0, 0.5, 0.5) == 1
    assert indicator_c2(1.5, 1.0, 0.5) == 1
    assert indicator_c2(2.0, 2.0, 0.5) == 1


# -- hand-evaluated losses ---------------------------------------------------

def two_sample_batch():
    # (score .8, error .5), (score .2, error 2)
    return np.array([0.8, 0.2]), np.array([0.0, 0.0]), np.array([0.5, 2.0])


def test_percentile_hard_two_samples():
    s, p, y = two_sample_batch()
    cfg = ObjectiveConfig.percentile(0.5, beta=2.0)
    assert percentile_loss_hard(s, p, y, cfg) == pytest.approx(0.125, abs=1e-12)


def test_percentile_hard_all_positive_is_mse():
    y, p = np.array([1.0, 2.0, 3.0]), np.array([1.5, 2.0, 2.0])
    cfg = ObjectiveConfig.percentile(0.7)
    assert percentile_loss_hard([0.9, 0.5, 0.6], p, y, cfg) == pytest.approx(np.mean((y - p) ** 2), abs=1e-15)


def test_percentile_hard_all_negative_pays_penalty():
    cfg = ObjectiveConfig.percentile(0.5, beta=1.0)
    assert percentile_loss_hard([0.1, 0.3], [0.0, 9.0], [5.0, 0.0], cfg) == 0.5


def test_percentile_soft_two_samples():
    s, p, y = two_sample_batch()
    loss, _, _ = percentile_loss_soft(s, p, y, ObjectiveConfig.percentile(0.5, beta=2.0))
    assert loss == pytest.approx(0.5, abs=1e-12)


def test_percentile_soft_override_is_mse():
    y, p = np.array([1.0, 2.0, 4.0]), np.array([0.5, 2.5, 2.0])
    loss, ds, dp = percentile_loss_soft([0.1, 0.2, 0.3], p, y, ObjectiveConfig.percentile(0.5), gate_override=True)
    assert loss == pytest.approx(np.mean((y - p) ** 2), abs=1e-12)
    np.testing.assert_allclose(dp, -2 * (y - p) / 3, atol=1e-15)
    assert not ds.any()


def test_percentile_soft_active_hinge_shifts_all_score_grads():
    s, p, y = np.array([0.1, 0.2]), np.zeros(2), np.array([0.5, 2.0])
    cfg_on = ObjectiveConfig.percentile(0.9, beta=3.0)
    _, ds_on, _ = percentile_loss_soft(s, p, y, cfg_on)
    _, ds_off, _ = percentile_loss_soft(s, p, y, ObjectiveConfig.percentile(0.1, beta=3.0))
    np.testing.assert_allclose(ds_on - ds_off, -3.0 / 2, atol=1e-15)


def test_threshold_hard_single_sample():
    cfg = ObjectiveConfig.threshold(0.5, delta=0.5, beta=1.0, gamma=1.0)
    assert threshold_loss_hard([0.5], [1.3], [1.0], cfg) == pytest.approx(0.09 + LN2, abs=1e-12)
    assert threshold_loss_hard([0.5], [1.3], [1.0], cfg) == pytest.approx(0.783147, abs=1e-6)


def test_threshold_hard_wrong_side_ce():
    cfg = ObjectiveConfig.threshold(0.5, delta=0.5, beta=0.0, gamma=1.0)
    ev = evaluate_batch([0.5], [3.0], [1.0], cfg)
    assert ev.c2[0] == 0
    assert ev.hard_loss == pytest.approx(4.0 + LN2, abs=1e-12)


def test_threshold_hard_perfect_sample_vanishes():
    cfg = ObjectiveConfig.threshold(0.5, delta=0.5)
    assert threshold_loss_hard([1 - 1e-9], [2.0], [2.0], cfg) < 1e-6


def test_threshold_soft_single_sample():
    cfg = ObjectiveConfig.threshold(0.5, delta=0.5, beta=1.0, gamma=1.0)
    loss, _, _ = threshold_loss_soft([0.5], [1.3], [1.0], cfg)
    assert loss == pytest.approx(0.5 * 0.09 + LN2, abs=1e-12)
    assert loss == pytest.approx(0.738147, abs=1e-6)


def test_threshold_soft_matched_labels_vanish():
    cfg = ObjectiveConfig.threshold(0.5, delta=0.1, gamma=1.0)
    loss, _, _ = threshold_loss_soft([1 - 1e-9, 1 - 1e-9], [1.0, 2.0], [1.0, 2.0], cfg)
    assert loss < 1e-6


def test_gamma_zero_reduces_to_percentile():
    rng = np.random.default_rng(0)
    s, p, y = rng.uniform(0.05, 0.95, 20), rng.normal(size=20), rng.normal(size=20)
    t = threshold_loss_soft(s, p, y, ObjectiveConfig.threshold(0.5, delta=0.6, beta=2.0, gamma=0.0))
    q = percentile_loss_soft(s, p, y, ObjectiveConfig.percentile(0.6, beta=2.0))
    assert t[0] == q[0]
    np.testing.assert_array_equal(t[1], q[1])
    np.testing.assert_array_equal(t[2], q[2])


def test_empty_batch():
    cfg = ObjectiveConfig.percentile()
    for fn in (percentile_loss_hard, percentile_loss_soft):
        with pytest.raises(EmptyBatch):
            fn([], [], [], cfg)


# -- gradients vs finite differences ----------------------------------------

def fd(fn, x, h=1e-6):
    out = np.empty_like(x)
    for i in range(x.size):
        a, b = x.copy(), x.copy()
        a[i] += h
        b[i] -= h
        out[i] = (fn(a) - fn(b)) / (2 * h)
    return out


def random_batch(seed, n=12):
    rng = np.random.default_rng(seed)
    return rng.uniform(0.05, 0.95, n), rng.normal(size=n), rng.normal(size=n)


@pytest.mark.parametrize("seed", range(20))
@pytest.mark.parametrize("delta", [0.2, 0.9])
def test_percentile_soft_gradients(seed, delta):
    s, p, y = random_batch(seed)
    cfg = ObjectiveConfig.percentile(delta, beta=1.7)
    if abs(s.mean() - delta) < 1e-3:
        pytest.skip("too close to the hinge kink")
    _, ds, dp = percentile_loss_soft(s, p, y, cfg)
    np.testing.assert_allclose(ds, fd(lambda v: percentile_loss_soft(v, p, y, cfg)[0], s), rtol=1e-6, atol=1e-9)
    np.testing.assert_allclose(dp, fd(lambda v: percentile_loss_soft(s, v, y, cfg)[0], p), rtol=1e-6, atol=1e-9)


@pytest.mark.parametrize("seed", range(20))
def test_threshold_soft_gradients_with_frozen_labels(seed):
    s, p, y = random_batch(seed)
    cfg = ObjectiveConfig.threshold(0.8, delta=0.3, beta=1.2, gamma=0.7)
    _, ds, dp = threshold_loss_soft(s, p, y, cfg)
    np.testing.assert_allclose(ds, fd(lambda v: threshold_loss_soft(v, p, y, cfg)[0], s), rtol=1e-6, atol=1e-9)
    # labels frozen: the prediction gradient is exactly the gated-MSE part
    _, _, dp_mse = percentile_loss_soft(s, p, y, ObjectiveConfig.percentile(0.3, beta=1.2))
    np.testing.assert_array_equal(dp, dp_mse)
    err = np.abs(y - p)
    if np.all(np.abs(err - 0.8) > 1e-4):
        np.testing.assert_allclose(dp, fd(lambda v: percentile_loss_soft(s, v, y, ObjectiveConfig.percentile(0.3, beta=1.2))[0], p),
                                   rtol=1e-6, atol=1e-9)


@given(st.lists(st.tuples(st.floats(0.01, 0.99), st.floats(-3, 3), st.floats(-3, 3)), min_size=1, max_size=20),
       st.floats(0.05, 1.0))
@settings(max_examples=100, deadline=None)
def test_score_partials_signs(rows, delta):
    s, p, y = (np.array(c) for c in zip(*rows))
    cfg = ObjectiveConfig.percentile(delta, beta=1.0)
    _, ds, _ = percentile_loss_soft(s, p, y, cfg)
    n = len(s)
    gated_mse_part = (y - p) ** 2 / n
    hinge_part = ds - gated_mse_part
    assert np.all(gated_mse_part >= 0)
    assert np.all(hinge_part <= 1e-15)


# -- brute-force truth tables ------------------------------------------------

def test_indicator_grid():
    scores = np.linspace(0.0, 1.0, 101)[1:-1]
    scores = np.append(scores, 0.5)
    for s in scores:
        assert indicator_c1(s) == (0 if s < 0.5 else 1)
    grid = [(y, pr, e) for y in np.linspace(-1, 1, 21) for pr in np.linspace(-1, 1, 21) for e in (0.1, 0.25, 0.5, 1.0)]
    for y, pr, e in grid:
        assert indicator_c2(y, pr, e) == (0 if abs(y - pr) > e else 1)
