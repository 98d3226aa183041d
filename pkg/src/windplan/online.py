"""Per-slot online adaptation against measured wind and the closed-loop runner.

At slot n the UAV knows its position q[n-1], ground velocity v_e[n-1], the
wind at both slot boundaries and the bits collected so far.  A small conic
program picks v_e[n], the slot's time shares, the min-speed slack delta and a
throughput relaxation zeta.  It minimises the acceleration part of the slot
power plus ``w3 * zeta`` while staying within ``xi_q`` of the planned next
waypoint and ``xi_v`` of the planned ground velocity.

If the slot program is infeasible the position bound is dropped, then the
velocity bound.  A dropped bound stays in the program in elastic form,
``|.| <= xi + s`` with a heavy penalty on ``s``, so the UAV steers back to
the plan as fast as the hard limits allow instead of drifting away.  Only
when the hard limits alone are infeasible does the runner fall back to
holding the previous airspeed, and that step counts as unrecovered.
"""
from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import comms, sca
from .conic import ConicProgram, Tolerances, solve
from .energy import Trajectory, propulsion_power
from .stochastic import OfflinePlan, remaining_volume_table
from .wind import WindPath, sample_path

log = logging.getLogger(__name__)

ZETA_UNIT = 1e6          # zeta is solved in Mbit; w3 is J per Mbit
HARD_TOL = 1e-6
DROP_ORDER = ((), ("position",), ("position", "velocity"))
ELASTIC_WEIGHT = 1e4     # J per metre (or m/s) beyond a dropped deviation bound


@dataclass
class OnlineState:
    n: int                   # slot about to be decided, 1..N+1
    q: np.ndarray            # q[n-1]
    v_e: np.ndarray          # v_e[n-1]
    w_prev: np.ndarray       # wind at waypoint n-1
    collected: np.ndarray    # bits per buoy before slot n
    energy_J: float = 0.0

    @property
    def v_air(self) -> np.ndarray:
        return self.v_e - self.w_prev


@dataclass
class StepDecision:
    n: int
    v_e: np.ndarray
    tau: np.ndarray
    delta: float
    zeta_bits: float
    slot_energy_J: float
    status: str              # optimal | relaxed:<dropped> | unrecovered
    dropped: tuple = ()
    objective: float = float("nan")


def accumulate(collected, tau, rates) -> np.ndarray:
    """Bits after the slot: previous total plus tau_k * R_k."""
    return np.asarray(collected, float) + np.asarray(tau, float) * np.asarray(rates, float)


def initial_state(plan: OfflinePlan, w0, K: int) -> OnlineState:
    """Start on the planned waypoint with the planned airspeed."""
    va0 = plan.v_e[0] - plan.mean_wind
    w0 = np.asarray(w0, float)
    return OnlineState(1, plan.q[0].copy(), va0 + w0, w0, np.zeros(K))


@dataclass
class P42Vars:
    ve: object
    tau: object
    delta: object
    zeta: object


def build_p42(state: OnlineState, plan: OfflinePlan, scenario, w_now, drop=()):
    """Slot program for slot ``state.n``; ``drop`` may hold ``position`` and/or
    ``velocity`` to remove the corresponding deviation bound."""
    n = state.n
    N = plan.N
    if not 1 <= n <= N + 1:
        raise ValueError(f"slot {n} outside the plan's 1..{N + 1}")
    if scenario.K != plan.tau.shape[1]:
        raise ValueError("plan and scenario disagree on the number of buoys")
    Ts = plan.slot_s
    tol = scenario.tolerances
    lim = scenario.limits
    e = scenario.energy
    w_now = np.asarray(w_now, float)
    K = scenario.K

    ch = scenario.channel
    rates = comms.link_rate(state.q, scenario.buoy_positions, ch.bandwidth_hz, ch.ref_snr,
                            ch.altitude_m)
    remaining = remaining_volume_table(plan)[n]
    demand = np.maximum(scenario.targets - state.collected - remaining, 0.0)

    prog = ConicProgram()
    ve = prog.var(2, "v_e", scale=sca.SPEED_SCALE)
    tau = prog.var(K, "tau")
    delta = prog.var(1, "delta", scale=sca.SPEED_SCALE)
    zeta = prog.var(1, "zeta")
    t = prog.var(1, "accel_epigraph")

    prog.add_ge(tau, 0.0, tag="time_share_nonneg")
    prog.add_ge(zeta, 0.0, tag="relaxation_nonneg")
    prog.add_le(tau.sum(), Ts, tag="tdma")
    prog.add_ge(tau * (rates / ZETA_UNIT) + zeta[0], demand / ZETA_UNIT, tag="slot_throughput")
    penalty = 0.0
    nxt = ve * (0.5 * Ts) + (state.q + 0.5 * Ts * state.v_e - plan.q[n])
    for name, bound, expr in (("position", tol.xi_q, nxt),
                              ("velocity", tol.xi_v, ve - plan.v_e[n])):
        tag = "waypoint_deviation" if name == "position" else "velocity_deviation"
        if name in drop:
            slack = prog.var(1, f"{name}_slack")
            prog.add_ge(slack, 0.0, tag=tag + "_slack")
            prog.add_soc(slack[0] + bound, expr, tag=tag)
            penalty = penalty + slack[0] * ELASTIC_WEIGHT
        else:
            prog.add_soc(np.array(bound), expr, tag=tag)
    va_prev = state.v_air
    dv = ve - w_now - va_prev
    prog.add_soc(np.array(lim.a_max * Ts), dv, tag="acceleration")
    prog.add_soc(np.array(lim.v_max), ve - w_now, tag="max_speed")
    vl = plan.v_e[n] - plan.mean_wind
    lin = ((ve - w_now - vl) * (2.0 * vl)).sum() + float(vl @ vl)
    prog.add_ge(delta, lim.v_min(w_now), tag="min_speed")
    prog.add_rsoc(lin.reshape(1), np.ones(1), delta.reshape(1, 1), tag="min_speed_taylor")
    prog.add_rsoc(t, np.ones(1), dv.reshape(1, 2), tag="accel_cost")
    s_prev = float(np.linalg.norm(va_prev))
    coef = e.w2 / (e.gravity ** 2 * s_prev * Ts)
    prog.minimize(t[0] * coef + zeta[0] * tol.w3 + penalty)
    return prog, P42Vars(ve, tau, delta, zeta), rates, demand


def slot_energy(va_prev, va_now, scenario, Ts) -> float:
    """Full slot cost at waypoint n-1, acceleration from the realized change."""
    a = (np.asarray(va_now) - np.asarray(va_prev)) / Ts
    return float(propulsion_power(va_prev, a, scenario.energy) * Ts)


def counts_energy(n: int, N: int, mode: str) -> bool:
    """Whether the slot decided at step n charges waypoint n-1's power."""
    return mode == "closed" or 2 <= n <= N + 1


def _fallback(state, plan, scenario, w_now, rates, demand):
    """Hold the previous airspeed (clipped to the speed limits) and serve
    the outstanding demand greedily."""
    lim = scenario.limits
    va = state.v_air.copy()
    s = np.linalg.norm(va)
    s_new = min(max(s, lim.v_min(w_now)), lim.v_max)
    va *= s_new / s
    Ts = plan.slot_s
    tau = np.zeros(scenario.K)
    left = Ts
    for k in np.argsort(-demand):
        if demand[k] <= 0 or rates[k] <= 0 or left <= 0:
            continue
        tau[k] = min(left, demand[k] / rates[k])
        left -= tau[k]
    short = float(np.maximum(demand - tau * rates, 0).sum())
    return va + w_now, tau, short


def online_step(state: OnlineState, plan: OfflinePlan, scenario, w_now,
                solver_tol: Tolerances | None = None):
    """Decide slot ``state.n`` and advance the state.  Returns (decision, new state)."""
    w_now = np.asarray(w_now, float)
    Ts = plan.slot_s
    dec = None
    for drop in DROP_ORDER:
        prog, v, rates, demand = build_p42(state, plan, scenario, w_now, drop)
        sol = solve(prog, solver_tol)
        if sol.ok:
            ve = v.ve.value(sol.x)
            tau = np.clip(v.tau.value(sol.x), 0.0, None)
            tau *= min(1.0, Ts / max(tau.sum(), 1e-300))
            zeta = max(0.0, float(v.zeta.value(sol.x)[0])) * ZETA_UNIT
            status = "optimal" if not drop else "relaxed:" + "+".join(drop)
            dec = StepDecision(state.n, ve, tau, float(v.delta.value(sol.x)[0]), zeta, 0.0,
                               status, drop, sol.objective)
            if drop:
                log.info("slot %d feasible only without %s", state.n, "+".join(drop))
            break
    if dec is None:
        ve, tau, short = _fallback(state, plan, scenario, w_now, rates, demand)
        log.warning("slot %d infeasible after all relaxations; holding airspeed", state.n)
        dec = StepDecision(state.n, ve, tau, float("nan"), short, 0.0, "unrecovered",
                           ("position", "velocity"))
    va_now = dec.v_e - w_now
    if counts_energy(state.n, plan.N, plan.mode):
        dec.slot_energy_J = slot_energy(state.v_air, va_now, scenario, Ts)
    q_next = state.q + 0.5 * Ts * (state.v_e + dec.v_e)
    new = OnlineState(state.n + 1, q_next, dec.v_e.copy(), w_now,
                      accumulate(state.collected, dec.tau, rates),
                      state.energy_J + dec.slot_energy_J)
    return dec, new


# hard limits ------------------------------------------------------------------------

def hard_violations(va_prev, va_now, tau, w_now, scenario, Ts) -> list[str]:
    lim = scenario.limits
    out = []
    s = float(np.linalg.norm(va_now))
    vmin = lim.v_min(w_now)
    if s > lim.v_max * (1 + HARD_TOL):
        out.append(f"max_speed {s:.6g}")
    if s < vmin * (1 - HARD_TOL):
        out.append(f"min_speed {s:.6g} < {vmin:.6g}")
    a = float(np.linalg.norm(np.asarray(va_now) - va_prev)) / Ts
    if a > lim.a_max * (1 + HARD_TOL):
        out.append(f"acceleration {a:.6g}")
    if tau.sum() > Ts * (1 + HARD_TOL) or tau.min() < -HARD_TOL * Ts:
        out.append("tdma")
    return out


# mission runner -----------------------------------------------------------------------

@dataclass
class RunReport:
    seed: int | None
    source: str
    trajectory: Trajectory
    tau: np.ndarray
    decisions: list[StepDecision]
    collected: np.ndarray
    targets: np.ndarray
    kinetic_J: float
    violations: list[tuple[int, str]]
    baseline_J: float
    baseline_violations: list[tuple[int, str]]
    baseline_infeasible: bool = False

    @property
    def slot_energies(self) -> np.ndarray:
        return np.array([d.slot_energy_J for d in self.decisions])

    @property
    def total_J(self) -> float:
        return float(self.slot_energies.sum() + self.kinetic_J)

    @property
    def shortfall_bits(self) -> np.ndarray:
        return np.maximum(self.targets - self.collected, 0.0)

    @property
    def zeta_bits(self) -> float:
        return float(sum(d.zeta_bits for d in self.decisions))

    @property
    def infeasible_steps(self) -> int:
        return sum(d.status != "optimal" for d in self.decisions)

    @property
    def unrecovered_steps(self) -> int:
        return sum(d.status == "unrecovered" for d in self.decisions)

    def summary(self) -> dict:
        return {"seed": self.seed, "source": self.source, "total_J": self.total_J,
                "shortfall_bits": float(self.shortfall_bits.sum()),
                "infeasible_steps": self.infeasible_steps,
                "unrecovered_steps": self.unrecovered_steps,
                "hard_violations": len(self.violations),
                "baseline_J": self.baseline_J,
                "baseline_violations": len(self.baseline_violations)}


def realized_energy(traj: Trajectory, scenario, mode: str) -> float:
    """Energy of a flown trajectory.  A flown lap need not close, so its
    last acceleration uses the realized final airspeed."""
    va = traj.v_air
    Ts = traj.slot_s
    if mode == "closed":
        return float((propulsion_power(va[:-1], traj.a, scenario.energy) * Ts).sum())
    per = propulsion_power(va[1:-1], traj.a[1:], scenario.energy) * Ts
    m = scenario.energy.mass_kg
    return float(per.sum() + 0.5 * m * (va[-1] @ va[-1] - va[0] @ va[0]))


def baseline_run(plan: OfflinePlan, scenario, wind: np.ndarray):
    """Follow the offline ground velocities and schedule verbatim; airspeed
    absorbs the wind.  Returns (energy, violations, infeasible flag)."""
    Ts = plan.slot_s
    traj = Trajectory(plan.q, plan.v_e, wind, Ts)
    va = traj.v_air
    viol = []
    for n in range(1, plan.N + 2):
        for msg in hard_violations(va[n - 1], va[n], plan.tau[n - 1], wind[n], scenario, Ts):
            viol.append((n, msg))
    if np.linalg.norm(va, axis=1).min() < 0.1:
        return float("inf"), viol, True
    return realized_energy(traj, scenario, plan.mode), viol, False


def check_plan(plan: OfflinePlan, scenario) -> None:
    if scenario.K != plan.tau.shape[1]:
        raise ValueError(f"plan has {plan.tau.shape[1]} buoys, scenario has {scenario.K}")
    if plan.tau.shape[0] != plan.N + 1 or plan.rates.shape != plan.tau.shape:
        raise ValueError("plan tables do not cover slots 1..N+1")


def run_ho2(scenario, plan: OfflinePlan, seed: int | None = None, wind: WindPath | None = None,
            solver_tol: Tolerances | None = None) -> RunReport:
    """One closed-loop mission along ``plan`` under a sampled wind path."""
    check_plan(plan, scenario)
    N = plan.N
    Ts = plan.slot_s
    if wind is None:
        wind = sample_path(scenario.wind, N + 2, 0 if seed is None else seed)
    w = np.asarray(wind.samples, float)
    if w.shape != (N + 2, 2):
        raise ValueError(f"wind path has {len(w)} samples, plan needs {N + 2}")
    state = initial_state(plan, w[0], scenario.K)
    q = [state.q.copy()]
    ve = [state.v_e.copy()]
    decisions, violations = [], []
    for n in range(1, N + 2):
        va_prev = state.v_air
        dec, state = online_step(state, plan, scenario, w[n], solver_tol)
        decisions.append(dec)
        if dec.status != "unrecovered":
            for msg in hard_violations(va_prev, dec.v_e - w[n], dec.tau, w[n], scenario, Ts):
                violations.append((n, msg))
        q.append(state.q.copy())
        ve.append(state.v_e.copy())
    traj = Trajectory(np.array(q), np.array(ve), w, Ts)
    va = traj.v_air
    kin = 0.0 if plan.mode == "closed" else 0.5 * scenario.energy.mass_kg * (
        va[-1] @ va[-1] - va[0] @ va[0])
    base_J, base_viol, base_inf = baseline_run(plan, scenario, w)
    return RunReport(seed, plan.source, traj, np.array([d.tau for d in decisions]), decisions,
                     state.collected, scenario.targets.copy(), float(kin), violations,
                     base_J, base_viol, base_inf)


def _run_one(args):
    scenario, plan, seed = args
    return run_ho2(scenario, plan, seed)


def run_ensemble(scenario, plan: OfflinePlan, seeds, jobs: int = 1) -> list[RunReport]:
    """Independent missions, one per seed, returned in seed order."""
    seeds = list(seeds)
    if jobs <= 1:
        return [run_ho2(scenario, plan, s) for s in seeds]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(_run_one, [(scenario, plan, s) for s in seeds]))


def ensemble_stats(reports: list[RunReport]) -> dict:
    tot = np.array([r.total_J for r in reports])
    base = np.array([r.baseline_J for r in reports])
    return {"runs": len(reports), "mean_J": float(tot.mean()),
            "std_J": float(tot.std(ddof=1)) if len(tot) > 1 else 0.0,
            "baseline_mean_J": float(base.mean()),
            "infeasible_steps": int(sum(r.infeasible_steps for r in reports)),
            "unrecovered_steps": int(sum(r.unrecovered_steps for r in reports)),
            "hard_violations": int(sum(len(r.violations) for r in reports)),
            "baseline_violation_runs": int(sum(bool(r.baseline_violations) for r in reports)),
            "max_shortfall_frac": float(max(
                (r.shortfall_bits / np.where(r.targets > 0, r.targets, 1)).max() for r in reports))}


def write_run_csv(report: RunReport, path) -> None:
    K = report.tau.shape[1]
    traj = report.trajectory
    va = traj.v_air
    with open(path, "w", newline="") as f:
        wr = csv.writer(f)
        wr.writerow(["n", "qx", "qy", "vex", "vey", "vax", "vay", "wx", "wy"]
                    + [f"tau_{k + 1}" for k in range(K)] + ["zeta_bits", "energy_J", "status"])
        for d in report.decisions:
            n = d.n
            wr.writerow([n, *traj.q[n], *traj.v_e[n], *va[n], *traj.wind[n], *d.tau,
                         d.zeta_bits, d.slot_energy_J, d.status])


def write_ensemble_csv(reports: list[RunReport], path) -> None:
    with open(path, "w", newline="") as f:
        wr = csv.writer(f)
        wr.writerow(["seed", "total_J", "shortfall_bits", "infeasible_steps", "unrecovered_steps",
                     "hard_violations", "baseline_J", "baseline_violations"])
        for r in reports:
            s = r.summary()
            wr.writerow([s["seed"], repr(s["total_J"]), repr(s["shortfall_bits"]),
                         s["infeasible_steps"], s["unrecovered_steps"], s["hard_violations"],
                         repr(s["baseline_J"]), s["baseline_violations"]])
