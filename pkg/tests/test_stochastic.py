import numpy as np
import pytest

from windplan import sca
from windplan.conic import solve
from windplan.stochastic import (OfflinePlan, SaaConfig, build_p32, load_plan, monte_carlo_energy,
                                 plan_from_fixed, remaining_volume_table,
                                 save_plan, solve_offline_sp)
from windplan.wind import saa_samples


def toy_plan(tau):
    N = tau.shape[0] - 1
    q = np.zeros((N + 2, 2))
    return OfflinePlan(q, q.copy(), tau, np.full_like(tau, 2.0), 1.0, "free", np.zeros(2), 0.0)


def test_remaining_table_shape_and_ends():
    rng = np.random.default_rng(0)
    tau = rng.uniform(0, 0.5, (8, 2))
    R = remaining_volume_table(toy_plan(tau))
    assert R.shape == (9, 2)
    assert np.all(R[-1] == 0.0)
    assert np.allclose(R[0], (tau * 2.0).sum(axis=0))
    assert np.all(np.diff(R, axis=0) <= 0)


def test_remaining_table_single_slot_step():
    tau = np.zeros((10, 1))
    tau[4, 0] = 1.0          # slot 5
    R = remaining_volume_table(toy_plan(tau))[:, 0]
    assert np.all(R[:5] == 2.0) and np.all(R[5:] == 0.0)


def test_planned_collection_meets_targets(small_chain):
    sc, plan = small_chain
    off = plan_from_fixed(plan, sc)
    assert np.all(off.remaining[0] >= sc.targets * (1 - 1e-6))


def test_zero_variance_saa_matches_fixed_wind_subproblem(small_chain):
    sc, plan = small_chain
    t = plan.trajectory
    N = sc.slotting.n_slots
    local_air = sca.LocalPoint.from_solution(t.q, t.v_air, plan.tau, sc.buoy_positions, sc.channel)
    local_gnd = sca.LocalPoint.from_solution(t.q, t.v_e, plan.tau, sc.buoy_positions, sc.channel)
    p22, _ = sca.build_p22(sc, local_air, sc.wind.mean_vec)
    samples = np.stack([p.samples for p in saa_samples(sc.wind, N + 2, 3, 0)])
    p32, _ = build_p32(sc, local_gnd, samples)
    a, b = solve(p22), solve(p32)
    assert a.ok and b.ok
    assert b.objective == pytest.approx(a.objective, rel=1e-6)


def test_saa_input_errors(small_chain):
    sc, plan = small_chain
    t = plan.trajectory
    local = sca.LocalPoint.from_solution(t.q, t.v_e, plan.tau, sc.buoy_positions, sc.channel)
    N = sc.slotting.n_slots
    with pytest.raises(ValueError):
        build_p32(sc, local, np.zeros((0, N + 2, 2)))
    with pytest.raises(ValueError):
        build_p32(sc, local, np.zeros((2, N + 1, 2)))


def test_endpoint_tolerances_are_inequalities():
    from windplan.fixtures import default_scenario
    from windplan.scenario import Endpoints
    sc = default_scenario([(0, 0)], 0.0, Endpoints((-300, 0), (300, 0), (25.0, 0), (25.0, 0)),
                          n_slots=15, slot_s=1.5)
    traj, tau = sca.straight_line_init(sc, (0.0, 0.0))
    local = sca.LocalPoint.from_solution(traj.q, traj.v_e, tau, sc.buoy_positions, sc.channel)
    samples = np.zeros((2, 17, 2))
    prog, _ = build_p32(sc, local, samples, SaaConfig(eps1=1.0, eps2=1.0))
    kinds = {b.tag: b.kind for b in prog.blocks}
    assert kinds["start_velocity_mean"] in ("nonneg", "soc")
    assert "start_velocity" not in kinds


def test_single_sample_equals_that_path(small_chain):
    sc, plan = small_chain
    sc = sc.with_wind(sigma_f=1.0)
    t = plan.trajectory
    off = solve_offline_sp(sc, t.q, t.v_e, plan.tau, SaaConfig(samples=1, seed=4))
    path = saa_samples(sc.wind, sc.slotting.n_slots + 2, 1, 4)[0].samples
    acc = np.linalg.norm(np.diff(off.v_e - path, axis=0), axis=1) / off.slot_s
    assert acc.max() <= sc.limits.a_max * (1 + 1e-6)
    assert off.validation["acceleration_mean"] <= 1e-6


def test_small_sigma_continuity(small_chain):
    sc, plan = small_chain
    t = plan.trajectory
    off = solve_offline_sp(sc.with_wind(sigma_f=0.01), t.q, t.v_e, plan.tau)
    assert off.energy_J == pytest.approx(plan.energy_J, rel=0.01)
    assert max(off.validation.values()) <= 1e-6


def test_identical_seeds_identical_plans(small_chain):
    sc, plan = small_chain
    sc = sc.with_wind(sigma_f=0.5)
    t = plan.trajectory
    cfg = SaaConfig(samples=20, seed=3)
    a = solve_offline_sp(sc, t.q, t.v_e, plan.tau, cfg)
    b = solve_offline_sp(sc, t.q, t.v_e, plan.tau, cfg)
    assert np.array_equal(a.v_e, b.v_e) and np.array_equal(a.tau, b.tau)
    assert a.seeds == list(range(3, 23))


def test_mean_wind_objective_is_a_lower_bound(eight_sp):
    sc, sp = eight_sp
    mc = monte_carlo_energy(sc, sp, count=1000)
    assert sp.objective_J <= mc.mean() * 1.02
    assert sp.sample_stats["accel_exceed_frac"] >= 0.0


@pytest.mark.slow
def test_saa_stable_in_sample_count(eight_lap, eight_sp):
    sc, sp100 = eight_sp
    _, lap = eight_lap
    t = lap.trajectory
    sp400 = solve_offline_sp(sc, t.q, t.v_e, lap.tau, SaaConfig(samples=400))
    assert abs(sp400.objective_J - sp100.objective_J) / sp100.objective_J < 0.02


def test_plan_file_round_trip(tmp_path, small_chain):
    sc, plan = small_chain
    off = plan_from_fixed(plan, sc)
    save_plan(off, tmp_path / "plan.json")
    back = load_plan(tmp_path / "plan.json")
    for name in ("q", "v_e", "tau", "rates", "targets"):
        assert np.array_equal(getattr(back, name), getattr(off, name))
    assert np.array_equal(back.remaining, off.remaining)
    assert back.mode == off.mode and back.slot_s == off.slot_s
