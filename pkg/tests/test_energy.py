import numpy as np
import pytest
from hypothesis import given, strategies as st

from windplan.energy import (Trajectory, max_range_speed, optimal_loiter_speed, power_gradient,
                             propulsion_power, trajectory_energy)
from windplan.scenario import EnergyParams

P = EnergyParams(9.26e-4, 2250.0, 9.8, 10.0)
vec = st.tuples(st.floats(-50, 50), st.floats(-50, 50)).filter(lambda v: np.hypot(*v) > 1.0)
acc = st.tuples(st.floats(-10, 10), st.floats(-10, 10))


def test_power_examples():
    assert propulsion_power([30.0, 0.0], [0.0, 0.0], P) == pytest.approx(100.0, abs=0.1)
    assert propulsion_power([0.0, 30.0], [9.8, 0.0], P) == pytest.approx(175.0, abs=0.1)
    with pytest.raises(ValueError):
        propulsion_power([0.01, 0.0], [0.0, 0.0], P)


@given(vec, acc)
def test_power_gradient_matches_finite_differences(v, a):
    v, a = np.array(v), np.array(a)
    gv, ga = power_gradient(v, a, P)
    h = 1e-6
    for i in range(2):
        e = np.eye(2)[i]
        dv = (propulsion_power(v + h * e, a, P) - propulsion_power(v - h * e, a, P)) / (2 * h)
        da = (propulsion_power(v, a + h * e, P) - propulsion_power(v, a - h * e, P)) / (2 * h)
        assert gv[i] == pytest.approx(dv, rel=1e-5, abs=1e-5)
        assert ga[i] == pytest.approx(da, rel=1e-5, abs=1e-5)


@given(vec, st.floats(0, 2 * np.pi))
def test_power_rotation_invariant(v, ang):
    c, s = np.cos(ang), np.sin(ang)
    R = np.array([[c, -s], [s, c]])
    v = np.array(v)
    a = np.array([1.0, 2.0])
    assert propulsion_power(R @ v, R @ a, P) == pytest.approx(propulsion_power(v, a, P), rel=1e-12)


def straight(N, speed0=30.0, speedF=30.0):
    v = np.tile([30.0, 0.0], (N + 2, 1))
    v[0] = [speed0, 0.0]
    v[-1] = [speedF, 0.0]
    q = np.zeros((N + 2, 2))
    for n in range(N + 1):
        q[n + 1] = q[n] + 0.5 * (v[n] + v[n + 1])
    return Trajectory(q, v, np.zeros((N + 2, 2)), 1.0)


def test_trajectory_energy_examples():
    e = trajectory_energy(straight(10), P)
    assert e.kinetic == 0.0
    assert e.total == pytest.approx(1000.0, abs=1.0)
    assert e.per_slot.shape == (10,)
    assert trajectory_energy(straight(10, 20.0, 30.0), P).kinetic == pytest.approx(2500.0)


def test_closed_lap_counts_every_slot():
    t = straight(10)
    e = trajectory_energy(t, P, closed=True)
    assert e.per_slot.shape == (11,) and e.kinetic == 0.0
    assert e.total == pytest.approx(1100.0, abs=1.0)


@given(st.lists(vec, min_size=4, max_size=8))
def test_kinematics_reconstruct(vs):
    v = np.array(vs)
    q = np.zeros_like(v)
    for n in range(len(v) - 1):
        q[n + 1] = q[n] + 0.5 * (v[n] + v[n + 1]) * 0.7
    t = Trajectory(q, v, np.zeros_like(v), 0.7)
    assert t.kinematic_residual() < 1e-9
    w = np.full_like(v, 2.0)
    t2 = Trajectory.from_airspeed(q, v - w, w, 0.7)
    assert np.allclose(t2.v_e, v) and np.allclose(t2.v_air, v - w)


def test_loiter_speed():
    assert optimal_loiter_speed(P) == pytest.approx(30.0, abs=0.01)
    p16 = EnergyParams(P.w1, 16 * P.w2)
    assert optimal_loiter_speed(p16) == pytest.approx(2 * optimal_loiter_speed(P))
    v = optimal_loiter_speed(P)
    grid = np.linspace(5, 50, 2001)
    powers = [propulsion_power([s, 0.0], [0.0, 0.0], P) for s in grid]
    assert abs(grid[int(np.argmin(powers))] - v) < 0.05
    assert max_range_speed(P) > v
