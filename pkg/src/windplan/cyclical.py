"""Cyclical (lap-based) planning for large data volumes.

The total volume Q per buoy is split over M identical closed laps, each
collecting Q0 = Q / M.  A lap is initialised from an exact circle or
figure-eight flown at constant ground speed, chosen by a grid search over
the lap period T0 and radius r (and orientation for the eight); SCA then
refines the lap with periodic boundary conditions, and a fine-tune pass
re-runs SCA around the best period and orientation.

Exact patterns satisfy the midpoint kinematics: with angular step ``d``
between waypoints on a circle of radius ``r``, the tangential ground speed
that reproduces the chord is ``2 r tan(d/2) / T_s``.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import comms, sca
from .energy import Trajectory, trajectory_energy

log = logging.getLogger(__name__)


class NoFeasibleInit(RuntimeError):
    def __init__(self, msg, best_ratio=None):
        super().__init__(msg)
        self.best_ratio = best_ratio


@dataclass(frozen=True)
class PatternParams:
    pattern: str           # circle | eight
    radius: float
    period: float
    theta: float = 0.0     # eight: lobe axis angle from the wind direction, degrees
    center: tuple = (0.0, 0.0)

    @property
    def speed(self) -> float:
        """Nominal ground speed from 2 pi r = V T0 (circle) or V T0 / 2 (eight)."""
        laps = 1 if self.pattern == "circle" else 2
        return laps * 2 * math.pi * self.radius / self.period


@dataclass
class Candidate:
    id: int
    params: PatternParams
    feasible: bool
    energy_J: float
    ratio: float = float("nan")
    reason: str = ""


@dataclass
class CyclicalPlan:
    M: int
    Q0: float
    lap: sca.FixedWindPlan
    init: PatternParams
    init_energy_J: float
    trace: list[Candidate] = field(default_factory=list)
    finetune: list[tuple] = field(default_factory=list)
    benchmark: PatternParams | None = None   # exact pattern behind init_energy_J

    @property
    def lap_energy_J(self) -> float:
        return self.lap.energy_J

    @property
    def total_energy_J(self) -> float:
        return self.M * self.lap.energy_J

    @property
    def theta(self) -> float:
        return self.init.theta


def partition_volume(Q: float, Q0_ref: float) -> int:
    if Q0_ref <= 0:
        raise ValueError("Q0 must be positive")
    return max(1, math.ceil(Q / Q0_ref - 1e-9))


def lap_slots(pattern: str, n_slots: int) -> int:
    """Slot count N per lap; an eight needs an even number of slots N+1."""
    if pattern == "eight" and (n_slots + 1) % 2:
        return n_slots + 1
    return n_slots


def wind_angle(wind) -> float:
    w = np.asarray(wind, float)
    return math.atan2(w[1], w[0]) if np.hypot(*w) > 0 else 0.0


def pattern_waypoints(params: PatternParams, N: int, wind) -> Trajectory:
    """Closed lap of N+2 waypoints (last repeats first) on the exact pattern."""
    Ts = params.period / (N + 1)
    c = np.asarray(params.center, float)
    r = params.radius
    if params.pattern == "circle":
        d = 2 * math.pi / (N + 1)
        ang = -math.pi / 2 + d * np.arange(N + 2)
        speed = 2 * r * math.tan(d / 2) / Ts
        q = c + r * np.column_stack([np.cos(ang), np.sin(ang)])
        ve = speed * np.column_stack([-np.sin(ang), np.cos(ang)])
    elif params.pattern == "eight":
        if (N + 1) % 2:
            raise ValueError("eight pattern needs an even slot count")
        h = (N + 1) // 2
        d = 2 * math.pi / h
        speed = 2 * r * math.tan(d / 2) / Ts
        a = wind_angle(wind) + math.radians(params.theta)
        e = np.array([math.cos(a), math.sin(a)])
        # lobe 1 counter-clockwise about c + r e, starting at the crossing
        ang1 = a + math.pi + d * np.arange(h)
        q1 = c + r * e + r * np.column_stack([np.cos(ang1), np.sin(ang1)])
        v1 = speed * np.column_stack([-np.sin(ang1), np.cos(ang1)])
        # lobe 2 clockwise about c - r e, starting at the crossing
        ang2 = a - d * np.arange(h + 1)
        q2 = c - r * e + r * np.column_stack([np.cos(ang2), np.sin(ang2)])
        v2 = speed * np.column_stack([np.sin(ang2), -np.cos(ang2)])
        q = np.vstack([q1, q2])
        ve = np.vstack([v1, v2])
    else:
        raise ValueError(f"unknown pattern {params.pattern!r}")
    w = np.asarray(wind, float)
    return Trajectory(q, ve, np.tile(w, (N + 2, 1)), Ts)


def lap_scenario(scenario, Q0: float, N: int, period: float):
    s = scenario.with_targets(Q0)
    s = replace(s, endpoints=None)
    return s.with_slotting(period / (N + 1), N)


def evaluate_pattern(scenario, params: PatternParams, N: int, wind, cid: int = 0):
    """Constant-ground-speed pattern: limits check, LP schedule and energy.
    Returns (Candidate, trajectory or None, schedule or None)."""
    w = np.asarray(wind, float)
    sc = scenario.with_slotting(params.period / (N + 1), N)
    traj = pattern_waypoints(params, N, w)
    viol = sca.validate_plan(sc, traj, np.zeros((N + 1, sc.K)), "closed", sc.limits.v_min(w))
    for key in ("min_speed", "max_speed", "acceleration"):
        if viol[key] > 1e-9:
            return Candidate(cid, params, False, float("inf"), reason=key), None, None
    rates = comms.rate_table(traj.q, sc.buoy_positions, sc.channel)
    lp = comms.feasibility_lp(rates, sc.targets, sc.slotting.slot_s)
    if not lp.feasible:
        return Candidate(cid, params, False, float("inf"), lp.ratio, "throughput"), None, None
    tau = sca.initial_schedule(sc, traj.q, lp)
    E = trajectory_energy(traj, sc.energy, closed=True).total
    return Candidate(cid, params, True, E, lp.ratio), traj, tau


@dataclass
class SearchGrid:
    t_step: float = 1.25
    t_count: int = 15          # l1
    r_count: int = 12          # l2
    r_min: float = 50.0
    theta_step: float = 15.0


def radius_grid(scenario, grid: SearchGrid) -> np.ndarray:
    pos = scenario.buoy_positions
    spread = float(np.max(np.linalg.norm(pos - pos.mean(axis=0), axis=1), initial=0.0))
    if len(pos) > 1:
        spread = float(np.max(np.linalg.norm(pos[:, None] - pos[None], axis=-1)))
    r_max = max(2 * spread, 500.0)
    return np.linspace(grid.r_min, r_max, grid.r_count)


def period_grid(scenario, pattern: str, Q0: float, grid: SearchGrid) -> np.ndarray:
    laps = 1 if pattern == "circle" else 2
    ch = scenario.channel
    r_peak = ch.bandwidth_hz * math.log2(1 + ch.ref_snr / ch.altitude_m ** 2)
    t_min = max(laps * 2 * math.pi * grid.r_min / scenario.limits.v_max,
                Q0 * scenario.K / r_peak)
    return t_min * grid.t_step ** np.arange(grid.t_count)


def initial_trajectory(scenario, Q0: float, pattern: str, wind=None, theta: float | None = None,
                       grid: SearchGrid | None = None, n_slots: int | None = None):
    """Grid search for the cheapest feasible exact pattern.

    Returns (best Candidate, trajectory, schedule, trace).  With
    ``pattern='eight'`` and ``theta=None`` every orientation on the grid is
    searched as well.
    """
    grid = grid or SearchGrid()
    w = np.asarray(scenario.wind.mean if wind is None else wind, float)
    N = lap_slots(pattern, n_slots or scenario.slotting.n_slots)
    base = lap_scenario(scenario, Q0, N, 1.0)
    center = tuple(scenario.center)
    thetas = [0.0] if pattern == "circle" else (
        [theta] if theta is not None else list(np.arange(0.0, 360.0, grid.theta_step)))
    trace: list[Candidate] = []
    best = None
    best_ratio = 0.0
    cid = 0
    for T0 in period_grid(base, pattern, Q0, grid):
        for r in radius_grid(base, grid):
            for th in thetas:
                params = PatternParams(pattern, float(r), float(T0), float(th), center)
                cand, traj, tau = evaluate_pattern(base, params, N, w, cid)
                cid += 1
                trace.append(cand)
                if np.isfinite(cand.ratio):
                    best_ratio = max(best_ratio, min(cand.ratio, 1.0))
                if cand.feasible and (best is None or _better(cand, best[0])):
                    best = (cand, traj, tau)
    if best is None:
        raise NoFeasibleInit(f"no feasible {pattern} for Q0={Q0:.4g} bits within the search caps",
                             best_ratio)
    return best[0], best[1], best[2], trace


def _better(a: Candidate, b: Candidate) -> bool:
    ka = (round(a.energy_J, 9), a.params.period, a.params.radius)
    kb = (round(b.energy_J, 9), b.params.period, b.params.radius)
    return ka < kb


def save_search_trace(trace: list[Candidate], path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["candidate_id", "T0", "r", "theta", "feasible", "energy_J"])
        for c in trace:
            w.writerow([c.id, repr(c.params.period), repr(c.params.radius), repr(c.params.theta),
                        int(c.feasible), repr(c.energy_J)])


def _sca_lap(scenario, Q0, params, N, w, opts):
    sc = lap_scenario(scenario, Q0, N, params.period)
    cand, traj, tau = evaluate_pattern(sc, params, N, w)
    if not cand.feasible:
        return None, cand
    try:
        plan = sca.sca_solve(sc, traj, tau, w, opts)
    except (sca.SubproblemFailure, sca.InitInfeasible) as exc:
        log.info("SCA failed for %s: %s", params, exc)
        return None, cand
    return plan, cand


def optimize_cyclical(scenario, Q: float | None = None, Q0: float | None = None,
                      M: int | None = None, pattern: str = "circle", wind=None,
                      theta: float | None = None, grid: SearchGrid | None = None,
                      opts: sca.SCAOptions | None = None, n_slots: int | None = None,
                      finetune: bool = True) -> CyclicalPlan:
    """Lap plan for per-buoy volume Q split into M laps (or laps of Q0).

    ``Q`` defaults to the scenario's largest buoy target.
    """
    w = np.asarray(scenario.wind.mean if wind is None else wind, float)
    if Q is None:
        Q = float(scenario.targets.max())
    if M is None:
        if Q0 is None:
            raise ValueError("give Q0 or M")
        M = partition_volume(Q, Q0)
    Q0 = Q / M
    N = lap_slots(pattern, n_slots or scenario.slotting.n_slots)
    cand0, traj0, tau0, trace = initial_trajectory(scenario, Q0, pattern, w, theta, grid, N)
    p0, e0 = refine_pattern(lap_scenario(scenario, Q0, N, 1.0), cand0, N, w)
    best_plan, _ = _sca_lap(scenario, Q0, p0, N, w, opts)
    best_params = p0
    tuned = []
    if best_plan is not None:
        tuned.append((p0.period, p0.theta, best_plan.energy_J))
    if finetune:
        d_theta = (0.0,) if pattern == "circle" else (0.0, -15.0, 15.0, -30.0, 30.0)
        for f in (0.9, 0.95, 1.05, 1.1):
            for dt in d_theta:
                params = replace(p0, period=p0.period * f, theta=(p0.theta + dt) % 360.0)
                plan, _ = _sca_lap(scenario, Q0, params, N, w, opts)
                if plan is None:
                    continue
                tuned.append((params.period, params.theta, plan.energy_J))
                if best_plan is None or (plan.energy_J, params.period) < (best_plan.energy_J,
                                                                          best_params.period):
                    best_plan, best_params = plan, params
        if pattern == "eight":
            for dt in (-15.0, 15.0, -30.0, 30.0):
                params = replace(p0, theta=(p0.theta + dt) % 360.0)
                plan, _ = _sca_lap(scenario, Q0, params, N, w, opts)
                if plan is None:
                    continue
                tuned.append((params.period, params.theta, plan.energy_J))
                if best_plan is None or plan.energy_J < best_plan.energy_J:
                    best_plan, best_params = plan, params
    if best_plan is None:
        raise NoFeasibleInit("SCA failed from every fine-tune start")
    return CyclicalPlan(M, Q0, best_plan, best_params, e0, trace, tuned, p0)


def refine_pattern(scenario, cand: Candidate, N: int, wind):
    """Local Nelder-Mead search over (log period, log radius) around a grid
    candidate; returns (params, energy) of the better of the two."""
    from scipy.optimize import minimize

    w = np.asarray(wind, float)

    def f(x):
        p = replace(cand.params, period=float(np.exp(x[0])), radius=float(np.exp(x[1])))
        c, _, _ = evaluate_pattern(scenario, p, N, w)
        return c.energy_J if c.feasible else 1e12

    x0 = np.log([cand.params.period, cand.params.radius])
    res = minimize(f, x0, method="Nelder-Mead",
                   options={"xatol": 1e-4, "fatol": 1e-6, "maxiter": 400,
                            "initial_simplex": x0 + np.array([[0, 0], [0.1, 0], [0, 0.1]])})
    if res.fun < cand.energy_J:
        return replace(cand.params, period=float(np.exp(res.x[0])),
                       radius=float(np.exp(res.x[1]))), float(res.fun)
    return cand.params, cand.energy_J


def benchmark_pattern(scenario, Q0: float, pattern: str, wind=None, theta: float | None = None,
                      grid: SearchGrid | None = None, n_slots: int | None = None):
    """Exact pattern with optimised period and radius (hence speed): the
    cheapest feasible grid candidate, refined by a local search."""
    w = np.asarray(scenario.wind.mean if wind is None else wind, float)
    N = lap_slots(pattern, n_slots or scenario.slotting.n_slots)
    cand, _, _, _ = initial_trajectory(scenario, Q0, pattern, w, theta, grid, N)
    return refine_pattern(lap_scenario(scenario, Q0, N, 1.0), cand, N, w)


def orientation_sweep(scenario, Q0: float, wind=None, thetas=None, grid=None, opts=None,
                      n_slots=None):
    """For each initial orientation: benchmark energy of the exact eight and
    the SCA-optimised lap started from it.  Returns a list of dicts."""
    w = np.asarray(scenario.wind.mean if wind is None else wind, float)
    grid = grid or SearchGrid()
    thetas = np.arange(0.0, 360.0, grid.theta_step) if thetas is None else thetas
    N = lap_slots("eight", n_slots or scenario.slotting.n_slots)
    rows = []
    for th in thetas:
        params, e_bench = benchmark_pattern(scenario, Q0, "eight", w, float(th), grid, N)
        plan, _ = _sca_lap(scenario, Q0, params, N, w, opts)
        rows.append({"theta0": float(th), "benchmark_J": e_bench,
                     "optimized_J": plan.energy_J if plan else float("inf"),
                     "plan": plan, "params": params})
    return rows


def benchmark_lap(scenario, plan: CyclicalPlan, wind=None):
    """Exact-pattern lap behind ``plan.init_energy_J``: (lap scenario,
    trajectory, schedule)."""
    w = np.asarray(scenario.wind.mean if wind is None else wind, float)
    N = plan.lap.trajectory.N
    sc = lap_scenario(scenario, plan.Q0, N, plan.benchmark.period)
    _, traj, tau = evaluate_pattern(sc, plan.benchmark, N, w)
    return sc, traj, tau


def lap_orientation(traj: Trajectory, wind) -> float:
    """Angle in [0, 180) degrees between the lap's principal axis (direction
    of largest positional spread) and the wind direction."""
    q = traj.q[:-1]
    X = q - q.mean(axis=0)
    evals, evecs = np.linalg.eigh(X.T @ X)
    axis = evecs[:, np.argmax(evals)]
    ang = math.degrees(math.atan2(axis[1], axis[0]) - wind_angle(wind))
    return ang % 180.0
