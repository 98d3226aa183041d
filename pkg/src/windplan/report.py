"""Planner artifacts: trajectory CSV, schedule CSV and a JSON summary."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import comms
from .comms import CommSchedule
from .energy import Trajectory

TRAJ_FILE = "trajectory.csv"
SCHED_FILE = "schedule.csv"
SUMMARY_FILE = "summary.json"


@dataclass
class SolveReport:
    trajectory: Trajectory
    schedule: CommSchedule
    energy_J: float
    collected_bits: np.ndarray
    targets_bits: np.ndarray
    relaxation_bits: float = 0.0
    diagnostics: dict = field(default_factory=dict)
    feasibility: dict = field(default_factory=dict)
    mode: str = "free"

    @property
    def feasible(self) -> bool:
        return all(v <= 1e-6 for v in self.feasibility.values())

    def check(self) -> None:
        if self.energy_J < 0:
            raise ValueError("negative energy")
        short = self.targets_bits - self.collected_bits
        if np.any(short > self.relaxation_bits + 1e-6 * np.maximum(self.targets_bits, 1.0)):
            raise ValueError("collected bits below targets beyond the declared relaxation")


def report_from_plan(plan, scenario, extra: dict | None = None) -> SolveReport:
    """Build a report from a FixedWindPlan (or anything with trajectory/tau/log)."""
    traj = plan.trajectory
    rates = comms.rate_table(traj.q, scenario.buoy_positions, scenario.channel)
    diag = {"iterations": len(plan.log) - 1,
            "objective_log_J": [float(r.objective_J) for r in plan.log],
            "max_rel_violation": float(max((r.max_violation for r in plan.log), default=0.0)),
            "status": getattr(plan, "status", "")}
    diag.update(extra or {})
    return SolveReport(traj, CommSchedule(np.asarray(plan.tau, float)), float(plan.energy_J),
                       comms.collected_volume(rates, plan.tau), scenario.targets.copy(), 0.0,
                       diag, dict(plan.validation), plan.mode)


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as f:
        wr = csv.writer(f)
        wr.writerow(header)
        for r in rows:
            wr.writerow([repr(float(x)) if not isinstance(x, (int, np.integer)) else int(x)
                         for x in r])


def save_report(r: SolveReport, path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    t = r.trajectory
    va = t.v_air
    # acceleration is defined on waypoints 0..N; the last row carries nan
    acc = np.vstack([t.a, np.full((1, 2), np.nan)])
    _write_rows(out / TRAJ_FILE, ["slot", "x", "y", "vex", "vey", "vax", "vay", "ax", "ay",
                                  "windx", "windy"],
                ([n, *t.q[n], *t.v_e[n], *va[n], *acc[n], *t.wind[n]] for n in range(len(t.q))))
    tau = r.schedule.tau
    _write_rows(out / SCHED_FILE, ["slot"] + [f"tau_{k + 1}" for k in range(tau.shape[1])],
                ([n + 1, *tau[n]] for n in range(len(tau))))
    summary = {"energy_J": r.energy_J, "slot_s": t.slot_s, "mode": r.mode,
               "collected_bits": r.collected_bits.tolist(), "targets_bits": r.targets_bits.tolist(),
               "relaxation_bits": r.relaxation_bits, "feasible": r.feasible,
               "feasibility": r.feasibility, "diagnostics": r.diagnostics}
    (out / SUMMARY_FILE).write_text(json.dumps(summary, indent=2, default=float))
    return out


def _read_rows(path):
    with open(path, newline="") as f:
        rd = csv.reader(f)
        header = next(rd)
        return header, np.array([[float(x) for x in row] for row in rd])


def load_report(path) -> SolveReport:
    p = Path(path)
    s = json.loads((p / SUMMARY_FILE).read_text())
    _, tr = _read_rows(p / TRAJ_FILE)
    _, sc = _read_rows(p / SCHED_FILE)
    traj = Trajectory(tr[:, 1:3], tr[:, 3:5], tr[:, 9:11], float(s["slot_s"]))
    return SolveReport(traj, CommSchedule(sc[:, 1:]), float(s["energy_J"]),
                       np.array(s["collected_bits"], float), np.array(s["targets_bits"], float),
                       float(s["relaxation_bits"]), s["diagnostics"], s["feasibility"], s["mode"])
