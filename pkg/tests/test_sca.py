import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from windplan import comms
from windplan.energy import Trajectory
from windplan.fixtures import MBIT, chain, default_scenario
from windplan.scenario import ChannelParams, Endpoints
from windplan.sca import (InitInfeasible, LocalPoint, build_p22, endpoint_mode, energy_index, plan_open,
                          sca_solve, speed_index, straight_benchmark, straight_line_init,
                          taylor_rate_lb, taylor_speed_lb, validate_plan)

CH = ChannelParams(1e6, 1e7, 100.0)
vec = st.tuples(st.floats(-50, 50), st.floats(-50, 50))
pos = st.tuples(st.floats(-2000, 2000), st.floats(-2000, 2000))


def test_taylor_speed_examples():
    assert taylor_speed_lb([30.0, 0.0], [30.0, 0.0]) == pytest.approx(900.0)
    assert taylor_speed_lb([0.0, 30.0], [30.0, 0.0]) == pytest.approx(-900.0)


@given(vec, vec)
def test_taylor_speed_under_estimates(v, vl):
    assert taylor_speed_lb(v, vl) <= np.dot(v, v) + 1e-9 * (1 + np.dot(v, v) + np.dot(vl, vl))


def test_taylor_rate_examples():
    b = np.zeros(2)
    assert taylor_rate_lb(b, b, b, CH) == pytest.approx(math.log2(1001), rel=1e-12)
    lb = taylor_rate_lb(np.array([100.0, 0.0]), b, b, CH)
    assert lb <= math.log2(501) + 1e-12


@given(pos, pos)
def test_taylor_rate_under_estimates_and_touches(q, ql):
    b = np.array([10.0, -20.0])
    q, ql = np.array(q), np.array(ql)
    true = comms.link_rate(q, b, 1.0, CH.ref_snr, CH.altitude_m)
    assert taylor_rate_lb(q, ql, b, CH) <= true + 1e-9
    touch = comms.link_rate(ql, b, 1.0, CH.ref_snr, CH.altitude_m)
    assert taylor_rate_lb(ql, ql, b, CH) == pytest.approx(touch, rel=1e-12)


def test_index_sets():
    assert list(speed_index(3, "closed")) == [0, 1, 2, 3]
    assert list(speed_index(3, "free")) == [1, 2, 3, 4]
    assert list(energy_index(3, "closed")) == [0, 1, 2, 3]
    assert list(energy_index(3, "fixed")) == [1, 2, 3]


def test_decision_variable_count():
    N, K = 4, 1
    sc = chain(n_slots=N)
    traj, tau = straight_line_init(sc, (0.0, 0.0), 60.0)
    sc = sc.with_slotting(traj.slot_s, N)
    local = LocalPoint.from_solution(traj.q, traj.v_air, tau, sc.buoy_positions, sc.channel)
    prog, _ = build_p22(sc, local, (0.0, 0.0))
    sizes = {k: s.stop - s.start for k, s in prog.var_names.items()}
    assert sizes["q"] + sizes["v"] + sizes["tau"] + sizes["A"] + sizes["delta"] == \
        2 * (N + 2) * 2 + (N + 1) * K * 2 + N + 1
    assert {"kinematics", "tdma", "throughput_taylor", "min_speed_taylor"} <= set(prog.tags())


def chain_run(Q, wind_x, N=30):
    sc = chain(Q, wind_x, n_slots=N)
    V, T, E_b = straight_benchmark(sc)
    sc = sc.with_slotting(T / (N + 1), N)
    traj, tau = straight_line_init(sc, sc.wind.mean)
    return sc, sca_solve(sc, traj, tau), E_b


@pytest.mark.parametrize("wind_x", [-5.0, 0.0, 5.0])
def test_sca_descends_and_validates(wind_x):
    sc, plan, E_b = chain_run(200 * MBIT, wind_x)
    obj = plan.objectives
    assert np.all(np.diff(obj) <= 1e-9 * np.abs(obj[:-1]))
    assert max(plan.validation.values()) <= 1e-6
    assert plan.energy_J <= E_b * (1 + 1e-9)
    assert plan.collected[0] >= sc.targets[0] * (1 - 1e-6)


def test_horizon_search_beats_straight_benchmark():
    sc = chain(200 * MBIT, 0.0, n_slots=30)
    _, _, E_b = straight_benchmark(sc)
    plan = plan_open(sc, search_iters=6, loop_starts=1)
    assert plan.energy_J < E_b
    assert max(plan.validation.values()) <= 1e-6


def test_no_data_matches_point_to_point_benchmark():
    sc, plan, E_b = chain_run(0.0, 0.0)
    assert plan.energy_J <= E_b * (1 + 1e-6)


def test_determinism():
    _, a, _ = chain_run(200 * MBIT, 0.0, N=20)
    _, b, _ = chain_run(200 * MBIT, 0.0, N=20)
    assert np.array_equal(a.objectives, b.objectives)
    assert np.array_equal(a.trajectory.q, b.trajectory.q)


def test_wind_consistency():
    N = 20
    sc = chain(200 * MBIT, 0.0, n_slots=N)
    _, T, _ = straight_benchmark(sc)
    sc = sc.with_slotting(T / (N + 1), N)
    energies = []
    for eps in (0.0, 1e-3):
        w = np.array([eps, 0.0])
        traj, tau = straight_line_init(sc, w)
        energies.append(sca_solve(sc, traj, tau, w).energy_J)
    assert abs(energies[1] - energies[0]) <= 1.0  # O(eps) J at eps = 1e-3 m/s


def test_infeasible_init_rejected():
    sc = chain(200 * MBIT, 0.0, n_slots=10)
    traj, tau = straight_line_init(sc, (0.0, 0.0), 60.0)
    sc = sc.with_slotting(traj.slot_s, 10)
    with pytest.raises(InitInfeasible):
        sca_solve(sc, traj, np.zeros_like(tau))


def test_validate_plan_reports_every_constraint():
    sc = default_scenario([(0, 0)], 0.0, Endpoints((0, 0), (100, 0)), n_slots=3)
    v = np.tile([25.0, 0.0], (5, 1))
    q = np.column_stack([np.arange(5) * 25.0, np.zeros(5)])
    t = Trajectory(q, v, np.zeros((5, 2)), 1.0)
    viol = validate_plan(sc, t, np.zeros((4, 1)))
    assert endpoint_mode(sc) == "free"
    assert set(viol) >= {"kinematics", "min_speed", "max_speed", "acceleration", "tdma",
                         "endpoints", "throughput"}
    assert max(viol.values()) == 0.0
