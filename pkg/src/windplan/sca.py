"""Fixed-wind trajectory and schedule planner.

The non-convex design problem (minimum energy subject to kinematics,
airspeed and acceleration limits, TDMA and per-buoy data targets) is solved
by successive convex approximation.  Each subproblem replaces

* the minimum-airspeed condition ``|v| >= delta`` by its tangent
  ``|v_l|^2 + 2 v_l.(v - v_l) >= delta^2``, and
* the data-rate term by the concave tangent of the spectral efficiency in
  the squared distance, coupled to the time share through
  ``A^2 <= tau * u`` with ``u`` below the tangent,

then solves the resulting second-order-cone program.  Each accepted
iterate is feasible for the next surrogate, so the recorded energies never
increase.

Acceleration is not a separate unknown: ``a[n] = (v[n+1] - v[n]) / T_s``.
Three endpoint modes are supported:

``fixed``   position and airspeed pinned at both ends
``free``    positions pinned, equal but free start/end airspeed
``closed``  periodic lap, ``q[0] = q[N+1]`` and ``v[0] = v[N+1]``
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from . import comms
from .conic import (ConicProgram, Tolerances, check_solution, cube_epigraph, inverse_epigraph,
                    quad_over_lin, solve)
from . import paths
from .energy import EnergyBreakdown, Trajectory, optimal_loiter_speed, trajectory_energy

log = logging.getLogger(__name__)

# expected magnitudes used to scale solver variables
POS_SCALE = 100.0
SPEED_SCALE = 10.0


class InitInfeasible(RuntimeError):
    pass


class SubproblemFailure(RuntimeError):
    def __init__(self, msg, iteration=None, status=None):
        super().__init__(msg)
        self.iteration = iteration
        self.status = status


def endpoint_mode(scenario) -> str:
    ep = scenario.endpoints
    if ep is None:
        return "closed"
    return "free" if ep.free_equal else "fixed"


def speed_index(N: int, mode: str) -> np.ndarray:
    """Waypoints carrying the min/max airspeed constraints (always N+1 of them)."""
    return np.arange(0, N + 1) if mode == "closed" else np.arange(1, N + 2)


def energy_index(N: int, mode: str) -> np.ndarray:
    """Waypoints whose slot power enters the objective."""
    return np.arange(0, N + 1) if mode == "closed" else np.arange(1, N + 1)


# tangent bounds --------------------------------------------------------------

def taylor_speed_lb(v, v_local):
    """|v_l|^2 + 2 v_l.(v - v_l): a global under-estimator of |v|^2."""
    v = np.asarray(v, dtype=float)
    vl = np.asarray(v_local, dtype=float)
    return np.sum(vl * vl, axis=-1) + 2.0 * np.sum(vl * (v - vl), axis=-1)


def taylor_rate_lb(q, q_local, buoy_pos, ch):
    """Tangent of log2(1 + g0/(H^2 + d2)) in d2 = |q - b|^2 taken at q_local,
    in bits/s/Hz; touches at q_local and lies below everywhere."""
    d = np.sum((np.asarray(q, float) - buoy_pos) ** 2, axis=-1)
    dl = np.sum((np.asarray(q_local, float) - buoy_pos) ** 2, axis=-1)
    return comms.spectral_eff(dl, ch) - comms.spectral_eff_slope(dl, ch) * (d - dl)


# local point and plan containers ---------------------------------------------

@dataclass
class LocalPoint:
    q: np.ndarray      # (N+2, 2)
    v: np.ndarray      # (N+2, 2) airspeed
    A: np.ndarray      # (N+1, K)
    l: int = 0

    @classmethod
    def from_solution(cls, q, v, tau, buoys, ch, l=0):
        """Touch point for the rate bound: A = sqrt(tau * spectral efficiency)."""
        d2 = np.sum((q[:-1, None, :] - buoys[None]) ** 2, axis=-1)
        se = comms.spectral_eff(d2, ch)
        return cls(q.copy(), v.copy(), np.sqrt(np.maximum(tau, 0.0) * se), l)


@dataclass
class IterRecord:
    iteration: int
    objective_J: float       # true energy of the accepted iterate
    surrogate_J: float       # optimal value of the convex subproblem
    max_violation: float
    status: str = "optimal"


@dataclass
class FixedWindPlan:
    trajectory: Trajectory
    tau: np.ndarray
    energy: EnergyBreakdown
    log: list[IterRecord]
    mode: str
    collected: np.ndarray
    validation: dict[str, float] = field(default_factory=dict)
    status: str = "converged"

    @property
    def energy_J(self) -> float:
        return self.energy.total

    @property
    def objectives(self) -> np.ndarray:
        return np.array([r.objective_J for r in self.log])

    @property
    def max_violation(self) -> float:
        return max(self.validation.values(), default=0.0)

    @property
    def horizon(self) -> float:
        return self.trajectory.slot_s * (self.trajectory.N + 1)


def save_iteration_log(plan: FixedWindPlan, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["iteration", "objective_J", "max_violation"])
        for r in plan.log:
            w.writerow([r.iteration, repr(r.objective_J), repr(r.max_violation)])


# subproblem ------------------------------------------------------------------

@dataclass
class P22Vars:
    q: object
    v: object
    tau: object
    A: object
    delta: object


def add_comm_block(prog, q, tau, A, local, scenario, targets=None):
    """TDMA, nonnegativity, the tangent throughput sum and the rate/time
    coupling for every slot and buoy."""
    Ts = scenario.slotting.slot_s
    ch = scenario.channel
    buoys = scenario.buoy_positions
    targets = scenario.targets if targets is None else np.asarray(targets, float)
    M, K = tau.shape
    prog.add_ge(tau, 0.0, tag="time_share_nonneg")
    prog.add_le(tau.sum(axis=1), Ts, tag="tdma")
    need = targets > 0
    if not need.any():
        return
    Al = local.A
    dl = np.sum((local.q[:-1, None, :] - buoys[None]) ** 2, axis=-1)   # (M, K)
    se = comms.spectral_eff(dl, ch)
    beta = comms.spectral_eff_slope(dl, ch)
    for k in np.flatnonzero(need):
        # sum_n (Al^2 + 2 Al (A - Al)) >= Qbar / B
        lin = (A[:, k] * (2.0 * Al[:, k])).sum() - float(np.sum(Al[:, k] ** 2))
        prog.add_ge(lin, targets[k] / ch.bandwidth_hz, tag="throughput_taylor")
        u = prog.var(M, scale=10.0)
        z = prog.var(M, scale=1e4)
        # A^2 <= tau * u
        prog.add_rsoc(tau[:, k], u, A[:, k].reshape(M, 1), tag="rate_time_coupling")
        # z >= |q[n-1] - b|^2
        prog.add_rsoc(z, np.ones(M), (q[:-1] - buoys[k]), tag="distance_epigraph")
        # u <= se_l - beta (z - d_l)
        prog.add_le(u + z * beta[:, k], se[:, k] + beta[:, k] * dl[:, k], tag="rate_taylor")


def add_energy_objective(prog, v_obj, delta, scenario, mode, const=0.0):
    """Slot power sum: w1 c + w2 p + (w2/g^2) t with c >= |v|^3, p >= 1/delta,
    t >= |a|^2 / delta.  ``v_obj`` is the airspeed expression per waypoint."""
    N = scenario.slotting.n_slots
    Ts = scenario.slotting.slot_s
    e = scenario.energy
    J = energy_index(N, mode)
    I = speed_index(N, mode)
    pos = {int(n): i for i, n in enumerate(I)}
    dJ = delta[np.array([pos[int(n)] for n in J])]
    vJ = v_obj[J]
    aJ = (v_obj[J + 1] - v_obj[J]) / Ts
    c = cube_epigraph(prog, vJ, tag="power_cubic", scale=SPEED_SCALE)
    p = inverse_epigraph(prog, dJ, tag="power_inverse", scale=1.0 / SPEED_SCALE)
    t = quad_over_lin(prog, aJ, dJ, tag="power_accel")
    obj = (c.sum() * e.w1 + p.sum() * e.w2 + t.sum() * (e.w2 / e.gravity ** 2)) * Ts + const
    prog.minimize(obj)
    return obj


def add_speed_block(prog, v, delta, local_v, scenario, mode, v_min):
    """delta >= v_min, |v| <= v_max and the tangent min-speed bound."""
    N = scenario.slotting.n_slots
    I = speed_index(N, mode)
    prog.add_ge(delta, v_min, tag="min_speed")
    prog.add_soc(np.full(len(I), scenario.limits.v_max), v[I], tag="max_speed")
    vl = local_v[I]
    lin = (v[I] * (2.0 * vl)).sum(axis=1) - np.sum(vl * vl, axis=1)
    prog.add_rsoc(lin, np.ones(len(I)), delta.reshape(len(I), 1), tag="min_speed_taylor")


def add_endpoints(prog, q, v, scenario, mode):
    ep = scenario.endpoints
    if mode == "closed":
        prog.add_eq(q[0] - q[-1], tag="closure_position")
        prog.add_eq(v[0] - v[-1], tag="closure_velocity")
        return
    prog.add_eq(q[0], np.array(ep.q0), tag="start_position")
    prog.add_eq(q[-1], np.array(ep.qF), tag="end_position")
    if mode == "fixed":
        prog.add_eq(v[0], np.array(ep.v0), tag="start_velocity")
        prog.add_eq(v[-1], np.array(ep.vF), tag="end_velocity")
    else:
        prog.add_eq(v[0] - v[-1], tag="equal_end_speeds")


def kinetic_const(scenario, mode) -> float:
    if mode != "fixed":
        return 0.0
    ep = scenario.endpoints
    return 0.5 * scenario.energy.mass_kg * (np.dot(ep.vF, ep.vF) - np.dot(ep.v0, ep.v0))


def build_p22(scenario, local: LocalPoint, wind) -> tuple[ConicProgram, P22Vars]:
    """Convex surrogate at ``local`` under constant wind ``wind``."""
    N = scenario.slotting.n_slots
    K = scenario.K
    Ts = scenario.slotting.slot_s
    if local.q.shape != (N + 2, 2) or local.v.shape != (N + 2, 2) or local.A.shape != (N + 1, K):
        raise ValueError("local point does not match the scenario slotting")
    w = np.asarray(wind, dtype=float)
    mode = endpoint_mode(scenario)
    prog = ConicProgram()
    q = prog.var((N + 2, 2), "q", scale=POS_SCALE)
    v = prog.var((N + 2, 2), "v", scale=SPEED_SCALE)
    tau = prog.var((N + 1, K), "tau")
    A = prog.var((N + 1, K), "A")
    delta = prog.var(N + 1, "delta", scale=SPEED_SCALE)
    # midpoint kinematics with ground velocity v + w
    prog.add_eq(q[1:] - q[:-1] - (v[:-1] + v[1:]) * (0.5 * Ts) - w * Ts, tag="kinematics")
    add_endpoints(prog, q, v, scenario, mode)
    prog.add_soc(np.full(N + 1, scenario.limits.a_max * Ts), v[1:] - v[:-1], tag="acceleration")
    add_speed_block(prog, v, delta, local.v, scenario, mode, scenario.limits.v_min(w))
    add_comm_block(prog, q, tau, A, local, scenario)
    add_energy_objective(prog, v, delta, scenario, mode, kinetic_const(scenario, mode))
    return prog, P22Vars(q, v, tau, A, delta)


# validation ------------------------------------------------------------------

def validate_plan(scenario, traj: Trajectory, tau: np.ndarray, mode: str | None = None,
                  v_min: float | None = None) -> dict[str, float]:
    """Relative violation of every true (non-surrogate) constraint."""
    mode = mode or endpoint_mode(scenario)
    lim = scenario.limits
    N = traj.N
    Ts = traj.slot_s
    va = traj.v_air
    if v_min is None:
        v_min = scenario.v_min()
    I = speed_index(N, mode)
    sp = np.linalg.norm(va[I], axis=1)
    scale_q = max(1.0, float(np.abs(traj.q).max()))
    out = {
        "kinematics": traj.kinematic_residual() / scale_q,
        "min_speed": max(0.0, float((v_min - sp).max())) / v_min,
        "max_speed": max(0.0, float((sp - lim.v_max).max())) / lim.v_max,
        "acceleration": max(0.0, float((np.linalg.norm(np.diff(va, axis=0), axis=1) / Ts
                                        - lim.a_max).max())) / lim.a_max,
        "time_share_nonneg": max(0.0, -float(tau.min())) / Ts,
        "tdma": max(0.0, float((tau.sum(axis=1) - Ts).max())) / Ts,
    }
    ep = scenario.endpoints
    if mode == "closed":
        out["closure"] = max(float(np.abs(traj.q[0] - traj.q[-1]).max()) / scale_q,
                             float(np.abs(va[0] - va[-1]).max()) / lim.v_max)
    else:
        e = max(np.abs(traj.q[0] - ep.q0).max(), np.abs(traj.q[-1] - ep.qF).max()) / scale_q
        if mode == "fixed":
            e = max(e, np.abs(va[0] - ep.v0).max() / lim.v_max,
                    np.abs(va[-1] - ep.vF).max() / lim.v_max)
        else:
            e = max(e, np.abs(va[0] - va[-1]).max() / lim.v_max)
        out["endpoints"] = float(e)
    rates = comms.rate_table(traj.q, scenario.buoy_positions, scenario.channel)
    got = comms.collected_volume(rates, tau)
    tgt = scenario.targets
    need = tgt > 0
    out["throughput"] = float(np.max(np.where(need, np.maximum(tgt - got, 0) / np.where(need, tgt, 1),
                                              0.0), initial=0.0))
    return out


# initialisers -----------------------------------------------------------------

def straight_line_init(scenario, wind, horizon: float | None = None) -> tuple[Trajectory, np.ndarray]:
    """Straight path from q0 to qF with a trapezoidal ground-speed profile that
    meets the endpoint airspeeds within the acceleration limit; exactly
    consistent with the midpoint kinematics.  Returns (trajectory, schedule)
    where the schedule comes from the feasibility LP."""
    ep = scenario.endpoints
    if ep is None:
        raise ValueError("straight-line initialiser needs endpoints")
    w = np.asarray(wind, float)
    if horizon is not None:
        scenario = scenario.with_slotting(horizon / (scenario.slotting.n_slots + 1),
                                          scenario.slotting.n_slots)
    N = scenario.slotting.n_slots
    Ts = scenario.slotting.slot_s
    D = np.asarray(ep.qF, float) - np.asarray(ep.q0, float)
    if ep.free_equal:
        g = D / ((N + 1) * Ts)
        ve = np.tile(g, (N + 2, 1))
    else:
        ve0 = np.asarray(ep.v0, float) + w
        veF = np.asarray(ep.vF, float) + w
        amax = scenario.limits.a_max
        g = D / ((N + 1) * Ts)
        for _ in range(20):
            m0 = max(1, int(np.ceil(np.linalg.norm(g - ve0) / (0.95 * amax * Ts))))
            m1 = max(1, int(np.ceil(np.linalg.norm(g - veF) / (0.95 * amax * Ts))))
            if m0 + m1 > N + 1:
                raise InitInfeasible("horizon too short to ramp between endpoint speeds")
            n = np.arange(N + 2)
            a_in = np.minimum(n / m0, 1.0)
            a_out = np.minimum((N + 1 - n) / m1, 1.0)
            alpha = a_in * a_out               # weight on g
            b0 = (1 - a_in)                     # weight on ve0
            b1 = a_in * (1 - a_out)             # weight on veF
            wts = np.full(N + 2, 1.0)
            wts[0] = wts[-1] = 0.5
            sa, s0, s1 = (wts * alpha).sum(), (wts * b0).sum(), (wts * b1).sum()
            g_new = (D / Ts - s0 * ve0 - s1 * veF) / sa
            if np.allclose(g_new, g, atol=1e-12):
                g = g_new
                break
            g = g_new
        ve = alpha[:, None] * g + b0[:, None] * ve0 + b1[:, None] * veF
    q = np.zeros((N + 2, 2))
    q[0] = ep.q0
    q[1:] = ep.q0 + np.cumsum(0.5 * (ve[:-1] + ve[1:]) * Ts, axis=0)
    q[-1] = ep.qF  # remove rounding drift; the sum is exact up to fp error
    wind_arr = np.tile(w, (N + 2, 1))
    traj = Trajectory(q, ve, wind_arr, Ts)
    lp = comms.feasibility_lp(comms.rate_table(q, scenario.buoy_positions, scenario.channel),
                              scenario.targets, Ts)
    tau = initial_schedule(scenario, q, lp)
    return traj, tau


def initial_schedule(scenario, q, lp=None) -> np.ndarray:
    """Feasible schedule with every nonzero-target time share strictly
    positive where the rate allows, so no tangent starts at A = 0."""
    Ts = scenario.slotting.slot_s
    rates = comms.rate_table(q, scenario.buoy_positions, scenario.channel)
    tgt = scenario.targets
    if lp is None:
        lp = comms.feasibility_lp(rates, tgt, Ts)
    if not lp.feasible:
        raise InitInfeasible(f"throughput: initial path reaches only {lp.ratio:.3f} of the target")
    if scenario.K == 1:
        return np.where(tgt > 0, Ts, 0.0) * np.ones((len(rates), 1))
    # convex mix of the LP vertex (scaled to its full margin) and a
    # proportional split; both are TDMA-feasible
    vertex = lp.schedule.tau * min(lp.ratio, 1e6)
    vertex = vertex * np.minimum(1.0, Ts / np.maximum(vertex.sum(axis=1, keepdims=True), 1e-300))
    prop = comms.proportional_schedule(rates, tgt, Ts)
    got_v = comms.collected_volume(rates, vertex)
    got_p = comms.collected_volume(rates, prop)
    need = tgt > 0
    for lam in (0.5, 0.7, 0.85, 0.95, 1.0):
        tau = lam * vertex + (1 - lam) * prop
        got = lam * got_v + (1 - lam) * got_p
        if np.all(got[need] >= tgt[need] * (1 + 1e-9)) or lam == 1.0:
            return tau
    return vertex


def constant_wind(scenario, wind=None) -> np.ndarray:
    return np.asarray(scenario.wind.mean if wind is None else wind, dtype=float)


def polish_schedule(scenario, traj, tau, mode, v_min, tol=1e-7):
    """Return a schedule that makes ``traj`` pass true-constraint validation,
    replacing ``tau`` by the LP schedule when solver round-off leaves the
    data targets marginally short; None if the trajectory itself fails."""
    viol = validate_plan(scenario, traj, tau, mode, v_min)
    if max(viol.values()) <= tol:
        return tau
    geometric = {k: x for k, x in viol.items()
                 if k not in ("throughput", "tdma", "time_share_nonneg")}
    if max(geometric.values()) > tol:
        return None
    Ts = scenario.slotting.slot_s
    tau = np.clip(tau, 0.0, None)
    over = tau.sum(axis=1, keepdims=True) / Ts
    tau = tau / np.maximum(over, 1.0)
    if validate_plan(scenario, traj, tau, mode, v_min)["throughput"] <= tol:
        return tau
    rates = comms.rate_table(traj.q, scenario.buoy_positions, scenario.channel)
    lp = comms.feasibility_lp(rates, scenario.targets, Ts)
    if not lp.feasible:
        return None
    return lp.schedule.tau


# SCA loop ---------------------------------------------------------------------

@dataclass
class SCAOptions:
    tol: float = 1e-4
    max_iters: int = 50
    solver_tol: Tolerances = field(default_factory=Tolerances)


def _true_energy(scenario, traj, mode):
    return trajectory_energy(traj, scenario.energy, closed=(mode == "closed"))


def check_init(scenario, traj, tau, mode, v_min, tol=1e-7) -> None:
    viol = validate_plan(scenario, traj, tau, mode, v_min)
    bad = {k: x for k, x in viol.items() if x > tol}
    if bad:
        worst = max(bad, key=bad.get)
        raise InitInfeasible(f"initial point violates {worst} (relative {bad[worst]:.3g})")


def sca_solve(scenario, init_traj: Trajectory, init_tau: np.ndarray, wind=None,
              opts: SCAOptions | None = None) -> FixedWindPlan:
    """Successive convex approximation from a feasible initial point."""
    opts = opts or SCAOptions()
    w = constant_wind(scenario, wind)
    mode = endpoint_mode(scenario)
    N = scenario.slotting.n_slots
    Ts = scenario.slotting.slot_s
    if init_traj.N != N or not np.isclose(init_traj.slot_s, Ts):
        raise ValueError("initial trajectory does not match the scenario slotting")
    v_min = scenario.limits.v_min(w)
    check_init(scenario, init_traj, init_tau, mode, v_min)
    buoys = scenario.buoy_positions
    ch = scenario.channel
    wind_arr = np.tile(w, (N + 2, 1))

    traj, tau = init_traj, np.asarray(init_tau, float)
    E = _true_energy(scenario, traj, mode)
    records = [IterRecord(0, E.total, E.total, 0.0, "init")]
    local = LocalPoint.from_solution(traj.q, traj.v_air, tau, buoys, ch, 0)
    status = "max-iters"
    for l in range(1, opts.max_iters + 1):
        prog, vars_ = build_p22(scenario, local, w)
        sol = solve(prog, opts.solver_tol)
        if not sol.ok:
            if l == 1:
                raise SubproblemFailure(f"subproblem {sol.status} at iteration {l}", l, sol.status)
            log.warning("subproblem %s at iteration %d; keeping previous iterate", sol.status, l)
            status = f"stopped:{sol.status}"
            break
        q = vars_.q.value(sol.x)
        v = vars_.v.value(sol.x)
        tau_new = np.maximum(vars_.tau.value(sol.x), 0.0)
        cand = Trajectory(q, v + wind_arr, wind_arr, Ts)
        E_new = _true_energy(scenario, cand, mode)
        viol = check_solution(prog, sol.x).max_rel_violation
        tau_new = polish_schedule(scenario, cand, tau_new, mode, v_min)
        if tau_new is None:
            log.info("iterate %d fails true-constraint validation; keeping previous", l)
            status = "stopped:validation"
            break
        if E_new.total > records[-1].objective_J:
            # no further descent beyond solver accuracy
            status = "converged"
            break
        rel = (records[-1].objective_J - E_new.total) / max(abs(records[-1].objective_J), 1e-12)
        traj, tau, E = cand, tau_new, E_new
        records.append(IterRecord(l, E.total, sol.objective, viol, sol.status))
        local = LocalPoint.from_solution(q, v, tau, buoys, ch, l)
        if rel < opts.tol:
            status = "converged"
            break
    rates = comms.rate_table(traj.q, buoys, ch)
    plan = FixedWindPlan(traj, tau, E, records, mode, comms.collected_volume(rates, tau),
                         status=status)
    plan.validation = validate_plan(scenario, traj, tau, mode, v_min)
    return plan


# benchmark and horizon search for open flights -------------------------------------

def straight_benchmark(scenario, wind=None, speed: float | None = None):
    """Straight flight at constant airspeed: the most energy-saving airspeed
    v* unless the data targets force a slower pass.  Returns
    (airspeed, horizon, energy) with energy on the scenario's slot count."""
    ep = scenario.endpoints
    w = constant_wind(scenario, wind)
    D = np.asarray(ep.qF, float) - np.asarray(ep.q0, float)
    L = float(np.linalg.norm(D))
    u = D / L
    p = scenario.energy
    N = scenario.slotting.n_slots
    v_lo = scenario.limits.v_min(w)

    def horizon_at(V):
        # airspeed V along heading h with (V h + w) parallel to u
        cross = u[0] * w[1] - u[1] * w[0]
        along = u @ w
        disc = V ** 2 - cross ** 2
        if disc <= 0:
            return np.inf
        g = along + np.sqrt(disc)
        return L / g if g > 0 else np.inf

    def feasible(V):
        T = horizon_at(V)
        if not np.isfinite(T):
            return False
        sc = scenario.with_slotting(T / (N + 1), N)
        traj, _ = _straight_traj(sc, w)
        rates = comms.rate_table(traj.q, scenario.buoy_positions, scenario.channel)
        return comms.feasibility_lp(rates, scenario.targets, sc.slotting.slot_s).feasible

    if speed is None:
        V = max(v_lo, min(optimal_loiter_speed(p), scenario.limits.v_max))
        if not feasible(V):
            lo, hi = v_lo * (1 + 1e-9), V
            if not feasible(lo):
                raise InitInfeasible("straight flight cannot meet the data targets")
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                lo, hi = (mid, hi) if feasible(mid) else (lo, mid)
            V = lo
    else:
        V = speed
    T = horizon_at(V)
    Ts = T / (N + 1)
    power = p.w1 * V ** 3 + p.w2 / V
    return V, T, N * Ts * power


def _straight_traj(scenario, w):
    ep = scenario.endpoints
    N = scenario.slotting.n_slots
    Ts = scenario.slotting.slot_s
    D = np.asarray(ep.qF, float) - np.asarray(ep.q0, float)
    g = D / ((N + 1) * Ts)
    ve = np.tile(g, (N + 2, 1))
    q = ep.q0 + np.arange(N + 2)[:, None] * g * Ts
    return Trajectory(q, ve, np.tile(w, (N + 2, 1)), Ts), g


def min_feasible_horizon(scenario, wind=None) -> float:
    """Shortest straight-line horizon meeting data targets and speed limits."""
    w = constant_wind(scenario, wind)
    ep = scenario.endpoints
    N = scenario.slotting.n_slots
    L = float(np.linalg.norm(np.subtract(ep.qF, ep.q0)))

    def speed_ok(T):
        sp = np.linalg.norm(np.subtract(ep.qF, ep.q0) / T - w)
        return scenario.limits.v_min(w) <= sp <= scenario.limits.v_max

    def data_ok(T):
        sc = scenario.with_slotting(T / (N + 1), N)
        traj, _ = _straight_traj(sc, w)
        rates = comms.rate_table(traj.q, scenario.buoy_positions, scenario.channel)
        return comms.feasibility_lp(rates, scenario.targets, sc.slotting.slot_s).feasible

    grid = np.geomspace(L / (scenario.limits.v_max + np.linalg.norm(w)), L / 0.5, 400)
    ok_speed = [T for T in grid if speed_ok(T)]
    if not ok_speed or not data_ok(ok_speed[-1]):
        raise InitInfeasible("no straight-line horizon meets the data targets")
    hi = ok_speed[-1]
    lo = ok_speed[0]
    if data_ok(lo):
        return lo
    for _ in range(60):
        mid = np.sqrt(lo * hi)
        lo, hi = (lo, mid) if data_ok(mid) else (mid, hi)
        if hi / lo < 1 + 1e-6:
            break
    return hi


def plan_open(scenario, wind=None, horizon: float | None = None,
              opts: SCAOptions | None = None, search_iters: int = 14,
              loop_starts: int = 3) -> FixedWindPlan:
    """Point-to-point plan.

    With ``horizon`` given, one SCA run from the straight line.  Otherwise
    the horizon is searched (slot count fixed): a golden-section search over
    straight-line starts, plus SCA runs from the ``loop_starts`` cheapest
    buoy-circling starts.  The lowest-energy plan wins, ties going to the
    shorter horizon.
    """
    w = constant_wind(scenario, wind)
    N = scenario.slotting.n_slots

    def run(T):
        sc = scenario.with_slotting(T / (N + 1), N)
        traj, tau = straight_line_init(sc, w)
        return sca_solve(sc, traj, tau, w, opts)

    if horizon is not None:
        return run(horizon)
    cache: dict[float, FixedWindPlan | None] = {}

    def f(T):
        if T not in cache:
            try:
                cache[T] = run(T)
            except (InitInfeasible, SubproblemFailure) as exc:
                log.info("horizon %.3f rejected: %s", T, exc)
                cache[T] = None
        p = cache[T]
        return np.inf if p is None else p.energy_J

    candidates: list[FixedWindPlan] = []
    try:
        T_lo = min_feasible_horizon(scenario, w) * (1 + 1e-6)
    except InitInfeasible:
        T_lo = None
    if T_lo is not None:
        try:
            _, T_b, _ = straight_benchmark(scenario, w)
        except InitInfeasible:
            T_b = T_lo
        a, b = T_lo, max(T_lo * 1.05, T_b * 1.6)
        phi = (np.sqrt(5) - 1) / 2
        c, d = b - phi * (b - a), a + phi * (b - a)
        fc, fd = f(c), f(d)
        for _ in range(search_iters):
            if fc <= fd:
                b, d, fd = d, c, fc
                c = b - phi * (b - a)
                fc = f(c)
            else:
                a, c, fc = c, d, fd
                d = a + phi * (b - a)
                fd = f(d)
        f(T_lo)
        candidates += [p for p in cache.values() if p is not None]
    if loop_starts and scenario.targets.any():
        for E0, T, m, r, traj, tau in loop_init_candidates(scenario, w)[:loop_starts]:
            sc = scenario.with_slotting(T / (N + 1), N)
            try:
                candidates.append(sca_solve(sc, traj, tau, w, opts))
            except SubproblemFailure as exc:
                log.info("loop start m=%d r=%g rejected: %s", m, r, exc)
    if not candidates:
        raise InitInfeasible("no horizon produced a feasible plan")
    return min(candidates, key=lambda p: (p.energy_J, p.horizon))


def loop_init_candidates(scenario, wind=None, loops=(1, 2, 3), radii=(120, 160, 200, 250, 300),
                         ground_speeds=(12, 16, 20, 25, 30, 35)):
    """Open-flight initialisers that circle the buoy centroid ``loops`` times
    between the endpoints, at constant ground speed.  Yields
    (energy, horizon, loops, radius, trajectory, schedule) for every candidate
    that meets all true constraints."""
    w = constant_wind(scenario, wind)
    ep = scenario.endpoints
    mode = endpoint_mode(scenario)
    N = scenario.slotting.n_slots
    v_min = scenario.limits.v_min(w)
    out = []
    for m in loops:
        for r in radii:
            poly = paths.loop_path(ep.q0, ep.qF, scenario.center, r, m)
            Lp = paths.polyline_length(poly)
            for g in ground_speeds:
                T = Lp / g
                sc = scenario.with_slotting(T / (N + 1), N)
                Ts = sc.slotting.slot_s
                q_ref = paths.resample(poly, N + 2)
                traj = paths.fit_kinematics(q_ref, paths.sketch_velocities(q_ref, Ts), Ts, w, mode,
                                            ep)
                try:
                    tau = initial_schedule(sc, traj.q)
                    check_init(sc, traj, tau, mode, v_min)
                except InitInfeasible:
                    continue
                E = _true_energy(sc, traj, mode).total
                out.append((E, T, m, r, traj, tau))
    out.sort(key=lambda c: (c[0], c[1], c[3]))
    return out
