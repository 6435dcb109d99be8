import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import direct_entropy_weights

from atsc.rewards import (
    InsufficientSamplesError,
    MetricsRecord,
    NormalizationWindow,
    RewardShaper,
    RewardWeights,
    combine,
    entropy_weights,
    normalize,
    raw_rewards,
)

PAPER = RewardWeights(0.5, 0.25, 0.25)


def test_raw_rewards_are_negated_increments():
    r = raw_rewards(MetricsRecord(5, 100.0, 500.0), MetricsRecord(5, 120.0, 530.0))
    assert r == (0, -20.0, -30.0)


def window_of(values, size=500):
    w = NormalizationWindow(size)
    for v in values:
        w.push(v)
    return w


def test_normalize_midpoint_and_max():
    assert normalize(-5.0, window_of([-10.0, 0.0])) == 0.5
    assert normalize(0.0, window_of([-10.0, -3.0, 0.0])) == 1.0


def test_normalize_constant_window():
    assert normalize(-4.0, window_of([-4.0, -4.0])) == 0.5


def test_window_absorbs_and_slides():
    w = NormalizationWindow(3)
    for v in (1.0, 2.0, 3.0, 4.0):
        w.normalize(v)
    assert list(w.values) == [2.0, 3.0, 4.0]


@given(st.lists(st.integers(-50, 50).map(float), min_size=1, max_size=80), st.integers(1, 12))
def test_window_bounds_match_brute_force(values, size):
    w = NormalizationWindow(size)
    for k, v in enumerate(values):
        w.push(v)
        recent = values[max(0, k + 1 - size) : k + 1]
        assert w.bounds() == (min(recent), max(recent))


def test_weights_must_be_on_simplex():
    with pytest.raises(ValueError):
        RewardWeights(0.5, 0.5, 0.5)


def test_entropy_constant_column_gets_zero():
    x = [[0.1, 0.5, 0.9], [0.2, 0.5, 0.1], [0.3, 0.5, 0.5], [0.4, 0.5, 0.3]]
    w = entropy_weights(x)
    assert w.w_efficiency == 0.0


def test_entropy_identical_columns():
    x = [[0.1, 0.1, 0.1], [0.7, 0.7, 0.7], [0.4, 0.4, 0.4]]
    w = entropy_weights(x)
    assert w.as_tuple() == pytest.approx((1 / 3, 1 / 3, 1 / 3), abs=1e-12)


def test_entropy_reference_matrix():
    x = [[0.1, 0.5, 0.9], [0.2, 0.5, 0.1], [0.3, 0.5, 0.5], [0.4, 0.5, 0.3]]
    expected = direct_entropy_weights(x)
    got = entropy_weights(x).as_tuple()
    assert got[1] == 0.0
    assert got == pytest.approx(tuple(expected), abs=1e-9)


def test_entropy_all_constant_falls_back():
    fb = RewardWeights(0.2, 0.3, 0.5)
    assert entropy_weights([[0.3, 0.3, 0.3]] * 5, fallback=fb) == fb


def test_entropy_needs_two_samples():
    with pytest.raises(InsufficientSamplesError):
        entropy_weights([[0.1, 0.2, 0.3]])


def test_combine_examples():
    assert combine((1, 1, 1), PAPER) == 1.0
    assert combine((1, 0, 0), PAPER) == 0.5
    assert combine((0.37, 0.9, 0.1), RewardWeights(1.0, 0.0, 0.0)) == 0.37


unit = st.floats(0.0, 1.0)


@given(st.lists(st.tuples(unit, unit, unit), min_size=2, max_size=40))
def test_entropy_weights_on_simplex(rows):
    w = entropy_weights(rows).as_tuple()
    assert abs(sum(w) - 1.0) <= 1e-9
    assert all(0.0 <= x <= 1.0 for x in w)


# integer-valued raw rewards, as produced by conflict counts and whole seconds
@given(
    st.lists(st.integers(-1000, 0).map(float), min_size=3, max_size=50),
    st.floats(0.01, 100.0),
    st.floats(-1e3, 1e3),
)
def test_min_max_affine_invariance(values, scale, shift):
    a, b = NormalizationWindow(20), NormalizationWindow(20)
    for v in values:
        x = a.normalize(v)
        y = b.normalize(scale * v + shift)
        assert x == pytest.approx(y, abs=1e-9)


@given(unit, unit, unit, unit, st.integers(0, 2))
def test_combine_monotone(r0, r1, r2, bump, channel):
    base = [r0, r1, r2]
    up = list(base)
    up[channel] = max(up[channel], bump)
    assert combine(up, PAPER) >= combine(base, PAPER)


@given(st.lists(st.tuples(st.floats(0, 50), st.floats(0, 500), st.floats(0, 900)), min_size=2, max_size=30))
def test_raw_rewards_nonpositive_for_cumulative_metrics(increments):
    rec = MetricsRecord()
    for dc, dw, de in increments:
        nxt = MetricsRecord(rec.ctc + dc, rec.cwt + dw, rec.cde + de)
        assert all(r <= 0 for r in raw_rewards(rec, nxt))
        rec = nxt


def test_shaper_warmup_then_min_max():
    shaper = RewardShaper(weights=PAPER, window=10, warmup=2, scales=(10.0, 100.0, 1000.0))
    prev = MetricsRecord()
    cur = MetricsRecord(2, 50.0, 500.0)
    r, raw, norm = shaper.reward(prev, cur)
    assert raw == (-2, -50.0, -500.0)
    assert norm == pytest.approx((0.8, 0.5, 0.5))
    shaper.reward(cur, MetricsRecord(2, 50.0, 500.0))
    _, _, norm = shaper.reward(MetricsRecord(), MetricsRecord(1, 25.0, 250.0))
    assert norm == pytest.approx((0.5, 0.5, 0.5))
    assert 0.0 <= r <= 1.0


def test_reweight_blends_with_initial():
    shaper = RewardShaper(weights=PAPER)
    rng = np.random.default_rng(0)
    shaper.samples.extend(map(tuple, rng.random((50, 3))))
    w = shaper.reweight(PAPER)
    ew = entropy_weights(rng.random((2, 3)))  # just exercise the API
    assert abs(sum(w.as_tuple()) - 1) < 1e-9 and ew is not None
    assert not shaper.samples
