"""Offline planning against wind statistics by sample average approximation.

Decision variables are ground velocities.  The objective evaluates power at
the mean-wind airspeed ``v_e - E[w]`` (a lower bound on the expected
energy by convexity), while wind-dependent constraints hold on average over
S sampled wind paths:

* mean acceleration norm ``(1/S) sum_i |(dv_e - dw_i) / T_s| <= a_max``
* mean airspeed norm ``(1/S) sum_i |v_e - w_i| <= v_max``
* the minimum-speed tangent, averaged over samples, taken at ``E[w]``
* for pinned endpoint airspeeds, mean endpoint error within eps1 / eps2.

The paths are drawn once per run and reused in every SCA iteration.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import comms, sca
from .conic import ConicProgram, check_solution, solve
from .energy import Trajectory, trajectory_energy
from .wind import saa_samples

log = logging.getLogger(__name__)


@dataclass
class SaaConfig:
    samples: int = 100
    seed: int = 0
    eps1: float = 1.0
    eps2: float = 1.0


@dataclass
class OfflinePlan:
    q: np.ndarray           # (N+2, 2)
    v_e: np.ndarray         # (N+2, 2)
    tau: np.ndarray         # (N+1, K), row n-1 is slot n
    rates: np.ndarray       # (N+1, K), rate at waypoint n-1 for slot n
    slot_s: float
    mode: str
    mean_wind: np.ndarray
    objective_J: float      # mean-wind energy (lower bound on expected energy)
    seeds: list[int] = field(default_factory=list)
    log: list = field(default_factory=list)
    validation: dict = field(default_factory=dict)
    source: str = "sp"
    targets: np.ndarray | None = None   # per-buoy bits this plan is built to collect
    sample_stats: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return len(self.q) - 2

    @property
    def remaining(self) -> np.ndarray:
        return remaining_volume_table(self)

    @property
    def trajectory(self) -> Trajectory:
        return Trajectory(self.q, self.v_e, np.tile(self.mean_wind, (self.N + 2, 1)), self.slot_s)

    @property
    def energy_J(self) -> float:
        return self.objective_J

    @property
    def objectives(self) -> np.ndarray:
        return np.array([r.objective_J for r in self.log])


def remaining_volume_table(plan: OfflinePlan) -> np.ndarray:
    """Q_off[n, k]: bits planned in slots n+1 .. N+1, for n = 0 .. N+1."""
    per_slot = plan.tau * plan.rates                      # row m-1 is slot m
    suffix = np.cumsum(per_slot[::-1], axis=0)[::-1]      # suffix[n] = sum rows n..N
    return np.vstack([suffix, np.zeros((1, per_slot.shape[1]))])


def plan_from_fixed(plan: sca.FixedWindPlan, scenario, source="fixed") -> OfflinePlan:
    traj = plan.trajectory
    rates = comms.rate_table(traj.q, scenario.buoy_positions, scenario.channel)
    return OfflinePlan(traj.q.copy(), traj.v_e.copy(), plan.tau.copy(), rates, traj.slot_s,
                       plan.mode, traj.wind[0].copy(), plan.energy_J, [], list(plan.log),
                       dict(plan.validation), source, scenario.targets.copy())


def plan_from_trajectory(traj: Trajectory, tau, scenario, mode, source="benchmark") -> OfflinePlan:
    rates = comms.rate_table(traj.q, scenario.buoy_positions, scenario.channel)
    E = trajectory_energy(traj, scenario.energy, closed=mode == "closed").total
    return OfflinePlan(traj.q.copy(), traj.v_e.copy(), np.asarray(tau, float).copy(), rates,
                       traj.slot_s, mode, traj.wind[0].copy(), E, [], [], {}, source,
                       scenario.targets.copy())


@dataclass
class P32Vars:
    q: object
    ve: object
    tau: object
    A: object
    delta: object


def build_p32(scenario, local: sca.LocalPoint, samples: np.ndarray,
              cfg: SaaConfig | None = None) -> tuple[ConicProgram, P32Vars]:
    """SAA surrogate at ``local``; ``local.v`` holds ground velocities and
    ``samples`` has shape (S, N+2, 2)."""
    cfg = cfg or SaaConfig()
    N = scenario.slotting.n_slots
    K = scenario.K
    Ts = scenario.slotting.slot_s
    samples = np.asarray(samples, float)
    if samples.ndim != 3 or samples.shape[0] < 1:
        raise ValueError("need at least one wind sample path")
    if samples.shape[1:] != (N + 2, 2):
        raise ValueError(f"sample paths have shape {samples.shape[1:]}, expected {(N + 2, 2)}")
    if local.q.shape != (N + 2, 2) or local.A.shape != (N + 1, K):
        raise ValueError("local point does not match the scenario slotting")
    S = samples.shape[0]
    Ew = scenario.wind.mean_vec
    mode = sca.endpoint_mode(scenario)
    lim = scenario.limits
    prog = ConicProgram()
    q = prog.var((N + 2, 2), "q", scale=sca.POS_SCALE)
    ve = prog.var((N + 2, 2), "v_e", scale=sca.SPEED_SCALE)
    tau = prog.var((N + 1, K), "tau")
    A = prog.var((N + 1, K), "A")
    delta = prog.var(N + 1, "delta", scale=sca.SPEED_SCALE)

    prog.add_eq(q[1:] - q[:-1] - (ve[:-1] + ve[1:]) * (0.5 * Ts), tag="kinematics")
    ep = scenario.endpoints
    if mode == "closed":
        prog.add_eq(q[0] - q[-1], tag="closure_position")
        prog.add_eq(ve[0] - ve[-1], tag="closure_velocity")
    else:
        prog.add_eq(q[0], np.array(ep.q0), tag="start_position")
        prog.add_eq(q[-1], np.array(ep.qF), tag="end_position")
        if mode == "fixed":
            for idx, target, eps, tag in ((0, ep.v0, cfg.eps1, "start_velocity_mean"),
                                          (N + 1, ep.vF, cfg.eps2, "end_velocity_mean")):
                e = prog.var(S)
                err = ve[idx].reshape(1, 2) - (samples[:, idx] + np.asarray(target))
                prog.add_soc(e, err, tag=tag)
                prog.add_le(e.sum() / S, eps, tag=tag)
        else:
            prog.add_eq(ve[0] - ve[-1], tag="equal_end_speeds")

    # mean acceleration norm, slots 0..N
    dW = samples[:, 1:] - samples[:, :-1]                          # (S, N+1, 2)
    dV = ve[1:] - ve[:-1]                                          # (N+1, 2)
    ea = prog.var((N + 1, S))
    rows = (dV.reshape(N + 1, 1, 2) - dW.transpose(1, 0, 2)) / Ts  # (N+1, S, 2)
    prog.add_soc(ea.reshape((N + 1) * S), rows.reshape((N + 1) * S, 2), tag="acceleration_mean")
    prog.add_le(ea.sum(axis=1) / S, lim.a_max, tag="acceleration_mean")

    I = sca.speed_index(N, mode)
    ev = prog.var((len(I), S), scale=sca.SPEED_SCALE)
    air = ve[I].reshape(len(I), 1, 2) - samples[:, I].transpose(1, 0, 2)
    prog.add_soc(ev.reshape(len(I) * S), air.reshape(len(I) * S, 2), tag="max_speed_mean")
    prog.add_le(ev.sum(axis=1) / S, lim.v_max, tag="max_speed_mean")

    # min-speed tangent averaged over samples, local wind at the mean
    vl = local.v[I] - Ew                                           # local airspeed
    wbar = samples[:, I].mean(axis=0)
    lin = ((ve[I] - wbar - local.v[I] + Ew) * (2.0 * vl)).sum(axis=1) + np.sum(vl * vl, axis=1)
    prog.add_ge(delta, lim.v_min(Ew), tag="min_speed")
    prog.add_rsoc(lin, np.ones(len(I)), delta.reshape(len(I), 1), tag="min_speed_taylor")

    sca.add_comm_block(prog, q, tau, A, local, scenario)
    sca.add_energy_objective(prog, ve - Ew, delta, scenario, mode, sca.kinetic_const(scenario, mode))
    return prog, P32Vars(q, ve, tau, A, delta)


def saa_validation(scenario, q, ve, tau, samples, mode, cfg: SaaConfig) -> dict[str, float]:
    """Relative violations of the sample-averaged and deterministic constraints."""
    lim = scenario.limits
    N = len(q) - 2
    Ts = scenario.slotting.slot_s
    Ew = scenario.wind.mean_vec
    traj = Trajectory(q, ve, np.tile(Ew, (N + 2, 1)), Ts)
    out = sca.validate_plan(scenario, traj, tau, mode)
    # replace the per-path limits by their sample-mean forms
    del out["max_speed"], out["acceleration"]
    I = sca.speed_index(N, mode)
    vmin = lim.v_min(Ew)
    spd_bar = np.linalg.norm(ve[I] - samples[:, I].mean(axis=0), axis=1)
    out["min_speed"] = max(0.0, float((vmin - spd_bar).max())) / vmin
    dV = np.diff(ve, axis=0)
    dW = np.diff(samples, axis=1)
    acc = np.linalg.norm((dV[None] - dW) / Ts, axis=-1).mean(axis=0)
    out["acceleration_mean"] = max(0.0, float((acc - lim.a_max).max())) / lim.a_max
    spd = np.linalg.norm(ve[None, I] - samples[:, I], axis=-1).mean(axis=0)
    out["max_speed_mean"] = max(0.0, float((spd - lim.v_max).max())) / lim.v_max
    if mode == "fixed":
        del out["endpoints"]
        ep = scenario.endpoints
        e0 = np.linalg.norm(ve[0] - samples[:, 0] - ep.v0, axis=-1).mean()
        eF = np.linalg.norm(ve[-1] - samples[:, -1] - ep.vF, axis=-1).mean()
        pos = max(np.abs(q[0] - ep.q0).max(), np.abs(q[-1] - ep.qF).max()) / max(1.0, np.abs(q).max())
        out["endpoints"] = float(max(pos, max(0.0, e0 - cfg.eps1) / max(cfg.eps1, 1e-9),
                                     max(0.0, eF - cfg.eps2) / max(cfg.eps2, 1e-9)))
    return out


def per_sample_stats(scenario, ve, samples, mode) -> dict[str, float]:
    """How often individual sample paths break the limits that only hold on
    average: fraction of (sample, slot) pairs above a_max / v_max and the
    worst values seen."""
    lim = scenario.limits
    Ts = scenario.slotting.slot_s
    acc = np.linalg.norm((np.diff(ve, axis=0)[None] - np.diff(samples, axis=1)) / Ts, axis=-1)
    I = sca.speed_index(len(ve) - 2, mode)
    spd = np.linalg.norm(ve[None, I] - samples[:, I], axis=-1)
    return {"accel_exceed_frac": float((acc > lim.a_max).mean()),
            "accel_max": float(acc.max()),
            "speed_exceed_frac": float((spd > lim.v_max).mean()),
            "speed_max": float(spd.max())}


@dataclass
class SPRecord:
    iteration: int
    objective_J: float
    surrogate_J: float
    max_violation: float
    status: str = "optimal"


def _repair_schedule(scenario, q, tau):
    """Clip and rescale ``tau`` to the TDMA frame; fall back to the LP schedule
    when round-off leaves a target marginally short."""
    Ts = scenario.slotting.slot_s
    tau = np.clip(tau, 0.0, None)
    tau = tau / np.maximum(tau.sum(axis=1, keepdims=True) / Ts, 1.0)
    rates = comms.rate_table(q, scenario.buoy_positions, scenario.channel)
    if np.all(comms.collected_volume(rates, tau) >= scenario.targets * (1 - 1e-9)):
        return tau
    lp = comms.feasibility_lp(rates, scenario.targets, Ts)
    return lp.schedule.tau if lp.feasible else None


def solve_offline_sp(scenario, init_q, init_ve, init_tau, cfg: SaaConfig | None = None,
                     opts: sca.SCAOptions | None = None) -> OfflinePlan:
    """SCA over the SAA program starting from a fixed-wind plan."""
    cfg = cfg or SaaConfig(samples=scenario.saa_samples, eps1=scenario.tolerances.eps1,
                           eps2=scenario.tolerances.eps2)
    opts = opts or sca.SCAOptions()
    N = scenario.slotting.n_slots
    Ts = scenario.slotting.slot_s
    mode = sca.endpoint_mode(scenario)
    Ew = scenario.wind.mean_vec
    paths = saa_samples(scenario.wind, N + 2, cfg.samples, cfg.seed)
    samples = np.stack([p.samples for p in paths])
    buoys = scenario.buoy_positions
    ch = scenario.channel

    def mean_energy(q, ve):
        traj = Trajectory(q, ve, np.tile(Ew, (N + 2, 1)), Ts)
        return trajectory_energy(traj, scenario.energy, closed=mode == "closed").total

    q, ve, tau = np.asarray(init_q, float), np.asarray(init_ve, float), np.asarray(init_tau, float)
    local = sca.LocalPoint.from_solution(q, ve, tau, buoys, ch, 0)
    records: list[SPRecord] = []
    best = None
    for l in range(1, opts.max_iters + 1):
        prog, vars_ = build_p32(scenario, local, samples, cfg)
        sol = solve(prog, opts.solver_tol)
        if not sol.ok:
            if best is None:
                raise sca.SubproblemFailure(f"SAA subproblem {sol.status} at iteration {l}", l,
                                            sol.status)
            log.info("SAA subproblem %s at iteration %d; keeping previous", sol.status, l)
            break
        q_n = vars_.q.value(sol.x)
        ve_n = vars_.ve.value(sol.x)
        tau_n = np.maximum(vars_.tau.value(sol.x), 0.0)
        E = mean_energy(q_n, ve_n)
        viol = check_solution(prog, sol.x).max_rel_violation
        val = saa_validation(scenario, q_n, ve_n, tau_n, samples, mode, cfg)
        if max(v for k, v in val.items() if k not in ("throughput", "tdma")) > 1e-6:
            log.info("SAA iterate %d fails validation; stopping", l)
            if best is None:
                raise sca.SubproblemFailure("first SAA iterate fails validation", l, "validation")
            break
        if val["throughput"] > 1e-7 or val["tdma"] > 1e-7:
            tau_n = _repair_schedule(scenario, q_n, tau_n)
            if tau_n is None:
                if best is None:
                    raise sca.SubproblemFailure("first SAA iterate misses the data targets", l,
                                                "validation")
                break
        if best is not None and E > records[-1].objective_J:
            break
        rel = np.inf if best is None else (records[-1].objective_J - E) / abs(records[-1].objective_J)
        records.append(SPRecord(l, E, sol.objective, viol, sol.status))
        best = (q_n, ve_n, tau_n)
        local = sca.LocalPoint.from_solution(q_n, ve_n, tau_n, buoys, ch, l)
        if rel < opts.tol:
            break
    q, ve, tau = best
    rates = comms.rate_table(q, buoys, ch)
    plan = OfflinePlan(q, ve, tau, rates, Ts, mode, Ew.copy(), records[-1].objective_J,
                       [cfg.seed + i for i in range(cfg.samples)], records,
                       saa_validation(scenario, q, ve, tau, samples, mode, cfg), "sp",
                       scenario.targets.copy())
    plan.sample_stats = per_sample_stats(scenario, ve, samples, mode)
    return plan


def monte_carlo_energy(scenario, plan: OfflinePlan, count=1000, seed=10_000) -> np.ndarray:
    """True energy of the plan's ground-velocity profile under sampled winds."""
    paths = saa_samples(scenario.wind, plan.N + 2, count, seed)
    out = np.empty(count)
    for i, p in enumerate(paths):
        traj = Trajectory(plan.q, plan.v_e, p.samples, plan.slot_s)
        out[i] = trajectory_energy(traj, scenario.energy, closed=plan.mode == "closed").total
    return out


# plan file -------------------------------------------------------------------------

def save_plan(plan: OfflinePlan, path) -> None:
    d = {
        "source": plan.source, "mode": plan.mode, "slot_s": plan.slot_s,
        "mean_wind": plan.mean_wind.tolist(), "objective_J": plan.objective_J,
        "q": plan.q.tolist(), "v_e": plan.v_e.tolist(), "tau": plan.tau.tolist(),
        "rates": plan.rates.tolist(), "remaining": remaining_volume_table(plan).tolist(),
        "seeds": list(plan.seeds),
        "targets": None if plan.targets is None else plan.targets.tolist(),
        "sample_stats": plan.sample_stats,
        "log": [[r.iteration, r.objective_J] for r in plan.log],
    }
    Path(path).write_text(json.dumps(d))


def load_plan(path) -> OfflinePlan:
    d = json.loads(Path(path).read_text())
    from types import SimpleNamespace

    return OfflinePlan(np.array(d["q"]), np.array(d["v_e"]), np.array(d["tau"]),
                       np.array(d["rates"]), float(d["slot_s"]), d["mode"],
                       np.array(d["mean_wind"]), float(d["objective_J"]), list(d["seeds"]),
                       [SimpleNamespace(iteration=i, objective_J=e) for i, e in d["log"]], {},
                       d["source"], None if d.get("targets") is None else np.array(d["targets"]),
                       d.get("sample_stats", {}))
