import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from windplan.comms import (CommSchedule, collected_volume, feasibility_lp, link_rate,
                            proportional_schedule)
from windplan.scenario import ChannelParams

CH = ChannelParams(1e6, 1e7, 100.0)


def rate(d):
    return link_rate(np.array([d, 0.0]), np.zeros(2), CH.bandwidth_hz, CH.ref_snr, CH.altitude_m)


def test_rate_examples():
    assert rate(0.0) == pytest.approx(1e6 * math.log2(1001))
    assert rate(0.0) == pytest.approx(9.967e6, rel=1e-4)
    assert rate(100.0) == pytest.approx(1e6 * math.log2(501))
    assert link_rate(np.zeros(2), np.zeros(2), 1e6, 1e-12, 100.0) < 1e-6


@given(st.floats(0, 5000), st.floats(0.1, 500))
def test_rate_decreasing_in_distance(d, dd):
    assert rate(d + dd) < rate(d)


@given(st.floats(1e3, 1e9), st.floats(1.01, 10))
def test_rate_increasing_in_snr(g, f):
    a = link_rate(np.zeros(2), np.ones(2), 1e6, g, 100.0)
    b = link_rate(np.zeros(2), np.ones(2), 1e6, g * f, 100.0)
    assert b > a


def test_collected_volume_examples():
    r = np.full((1, 1), rate(0.0))
    assert collected_volume(r, np.zeros((1, 1)))[0] == 0.0
    assert collected_volume(r, np.ones((1, 1)))[0] == pytest.approx(9.967e6, rel=1e-4)
    two = collected_volume(np.full((2, 1), rate(0.0)), np.full((2, 1), 0.5))
    assert two[0] == pytest.approx(collected_volume(r, np.ones((1, 1)))[0])
    with pytest.raises(ValueError):
        collected_volume(np.ones((2, 1)), np.ones((3, 1)))


@given(st.lists(st.floats(0, 1), min_size=4, max_size=4), st.floats(1e5, 1e7))
def test_equal_rate_reallocation_invariant(taus, r):
    tau = np.array(taus).reshape(2, 2)
    rates = np.full((2, 2), r)
    swapped = tau[:, ::-1]
    assert collected_volume(rates, tau).sum() == pytest.approx(collected_volume(rates, swapped).sum())


def test_lp_examples():
    rates = np.full((10, 1), 1e7)
    res = feasibility_lp(rates, 5e7, 1.0)
    assert res.feasible and res.schedule.tau.sum() == pytest.approx(5.0)
    assert not feasibility_lp(rates, 2e8, 1.0).feasible
    assert feasibility_lp(rates, 2e8, 1.0).ratio == pytest.approx(0.5)


def brute_check(rates, targets, Ts, tau):
    assert tau.min() >= -1e-9
    assert (tau.sum(axis=1) - Ts).max() <= 1e-9
    got = collected_volume(rates, tau)
    assert np.all(got >= np.asarray(targets) * (1 - 1e-9) - 1e-9)


@given(st.integers(1, 8), st.integers(1, 3), st.integers(0, 2**31 - 1), st.floats(0.05, 1.5))
def test_lp_schedule_passes_brute_force(M, K, seed, load):
    rng = np.random.default_rng(seed)
    rates = rng.uniform(1e5, 1e7, (M, K))
    cap = rates.max(axis=1).sum()
    targets = rng.uniform(0.2, 1.0, K) * load * cap / K
    res = feasibility_lp(rates, targets, 1.0)
    if res.feasible:
        brute_check(rates, targets, 1.0, res.schedule.tau)
        assert CommSchedule(res.schedule.tau).check(1.0) <= 1e-9
    else:
        assert res.ratio < 1.0


@given(st.floats(0.1, 0.7))
def test_symmetric_buoys(frac):
    rates = np.full((6, 2), 1e6)
    cap = 6e6
    res = feasibility_lp(rates, [frac * cap, frac * cap], 1.0)
    assert res.feasible == (frac <= 0.5 + 1e-12)
    if res.feasible:
        got = collected_volume(rates, res.schedule.tau)
        assert got[0] == pytest.approx(got[1], rel=1e-6)


def test_proportional_schedule_respects_tdma():
    rates = np.array([[1e6, 2e6], [3e6, 1e6]])
    tau = proportional_schedule(rates, [1e6, 1e6], 1.0)
    assert tau.min() >= 0 and np.all(tau.sum(axis=1) <= 1.0 + 1e-12)
