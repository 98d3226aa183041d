import os

from hypothesis import HealthCheck, settings

# one line per acceptance criterion, filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[str, str]] = {}

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("quick", deadline=None, max_examples=15)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

import pytest

from windplan import cyclical, sca, stochastic
from windplan.fixtures import MBIT, chain, single_buoy_lap


@pytest.fixture(scope="session")
def small_chain():
    """Chain fixture on 21 slots at the straight-line benchmark horizon, with
    its fixed-wind plan."""
    N = 20
    sc = chain(200 * MBIT, 0.0, n_slots=N)
    _, T, _ = sca.straight_benchmark(sc)
    sc = sc.with_slotting(T / (N + 1), N)
    traj, tau = sca.straight_line_init(sc, sc.wind.mean)
    return sc, sca.sca_solve(sc, traj, tau)


@pytest.fixture(scope="session")
def eight_lap():
    """Single-buoy figure-eight lap in a 10 m/s south-to-north wind collecting
    400 Mbits; returns (lap scenario, fixed-wind lap plan)."""
    sc = single_buoy_lap(400 * MBIT, wind=(0.0, 10.0))
    cp = cyclical.optimize_cyclical(sc, 400 * MBIT, 400 * MBIT, 1, "eight", finetune=False)
    lap = cp.lap
    lsc = cyclical.lap_scenario(sc, 400 * MBIT, lap.trajectory.N, lap.horizon)
    return lsc, lap


@pytest.fixture(scope="session")
def eight_sp(eight_lap):
    """SP plan for the figure-eight lap at sigma_f = 1."""
    lsc, lap = eight_lap
    lsc = lsc.with_wind(sigma_f=1.0)
    t = lap.trajectory
    return lsc, stochastic.solve_offline_sp(lsc, t.q, t.v_e, lap.tau)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        verdict, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {verdict}  {detail}")
