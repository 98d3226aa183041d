"""Command-line entry points.

Every command writes into a run directory ``<out>/<command>-<hash>`` where
the hash covers the effective parameters, so identical invocations land in
the same place with identical contents.  ``manifest.json`` in that directory
records the parameters.  The default output root is ``$WINDPLAN_OUT`` or
``./runs``.

Exit codes: 0 success, 2 input error, 3 infeasible, 4 solver failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path


from . import __version__, cyclical, online, sca, stochastic
from .report import report_from_plan, save_report
from .scenario import ScenarioError, load_scenario, scenario_to_dict

log = logging.getLogger("windplan")

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_SOLVER = 0, 2, 3, 4
OUT_ENV = "WINDPLAN_OUT"


class InputError(Exception):
    pass


# argument helpers ------------------------------------------------------------------

def vec2(text: str) -> tuple[float, float]:
    try:
        x, y = (float(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected vx,vy, got {text!r}") from None
    return x, y


def seed_range(text: str) -> list[int]:
    try:
        if ".." in text:
            a, b = text.split("..")
            a, b = int(a), int(b)
        else:
            a = b = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a..b, got {text!r}") from None
    if b < a:
        raise argparse.ArgumentTypeError("empty seed range")
    return list(range(a, b + 1))


def float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _scenario(args):
    s = load_scenario(args.scenario)
    if getattr(args, "sigma", None) is not None:
        s = s.with_wind(sigma_f=args.sigma)
    if getattr(args, "wind", None) is not None:
        s = s.with_wind(mean=args.wind)
    return s


def run_dir(args, scenario, extra=None) -> Path:
    params = {k: v for k, v in sorted(vars(args).items()) if k not in ("out", "func", "verbose", "jobs")}
    manifest = {"command": args.command, "version": __version__, "params": params,
                "scenario": scenario_to_dict(scenario) if scenario is not None else None}
    if extra:
        manifest.update(extra)
    text = json.dumps(manifest, sort_keys=True, default=str)
    digest = hashlib.sha256(text.encode()).hexdigest()[:12]
    root = Path(args.out or os.environ.get(OUT_ENV) or "runs")
    d = root / f"{args.command}-{digest}"
    d.mkdir(parents=True, exist_ok=True)
    (d / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str))
    return d


def write_csv(path, header, rows):
    with open(path, "w", newline="") as f:
        wr = csv.writer(f)
        wr.writerow(header)
        wr.writerows(rows)


def plot_spec(path, title, x, y, series_file, kind="line"):
    Path(path).write_text(json.dumps({"title": title, "kind": kind, "data": series_file,
                                      "x": x, "y": y}, indent=2))


# commands -------------------------------------------------------------------------

def _closed_plan(s, args, M=1, Q0=None):
    pattern = getattr(args, "pattern", None) or "circle"
    return cyclical.optimize_cyclical(s, Q0=Q0, M=M, pattern=pattern, theta=getattr(args, "theta", None),
                                      finetune=not getattr(args, "fast", False))


def _benchmark_plan(s, cp=None):
    """Plan file for the benchmark scheme: the exact pattern for laps, the
    constant-airspeed straight line for open flights."""
    if cp is not None:
        sc, traj, tau = cyclical.benchmark_lap(s, cp)
        return stochastic.plan_from_trajectory(traj, tau, sc, "closed", "benchmark")
    _, T, _ = sca.straight_benchmark(s)
    N = s.slotting.n_slots
    sc = s.with_slotting(T / (N + 1), N)
    traj, tau = sca.straight_line_init(sc, s.wind.mean_vec)
    return stochastic.plan_from_trajectory(traj, tau, sc, sca.endpoint_mode(sc), "benchmark")


def cmd_plan_fixed(args) -> int:
    s = _scenario(args)
    d = run_dir(args, s)
    if s.closed:
        cp = _closed_plan(s, args, M=1)
        plan = cp.lap
        lsc = cyclical.lap_scenario(s, cp.Q0, plan.trajectory.N, plan.horizon)
        bench = {"benchmark_J": cp.init_energy_J}
        bplan = _benchmark_plan(s, cp)
    else:
        plan = sca.plan_open(s, horizon=args.horizon)
        lsc = s.with_slotting(plan.trajectory.slot_s, plan.trajectory.N)
        V, T, E = sca.straight_benchmark(s)
        bench = {"benchmark_J": E, "benchmark_airspeed": V, "benchmark_horizon_s": T}
        bplan = _benchmark_plan(s)
    rep = report_from_plan(plan, lsc, {"horizon_s": plan.horizon, **bench})
    save_report(rep, d)
    sca.save_iteration_log(plan, d / "iterations.csv")
    stochastic.save_plan(stochastic.plan_from_fixed(plan, lsc), d / "plan.json")
    stochastic.save_plan(bplan, d / "benchmark_plan.json")
    print(json.dumps({"dir": str(d), "energy_J": plan.energy_J, **bench}))
    return EXIT_OK


def cmd_plan_cyclical(args) -> int:
    s = _scenario(args)
    d = run_dir(args, s)
    Q = float(s.targets.max())
    if args.sweep_M:
        rows = []
        for M in args.sweep_M:
            cp = cyclical.optimize_cyclical(s, Q=Q, M=int(M), pattern=args.pattern, theta=args.theta,
                                            finetune=not args.fast)
            rows.append([int(M), cp.Q0, cp.lap_energy_J, cp.total_energy_J, cp.init_energy_J])
            log.info("M=%d total %.1f J", M, cp.total_energy_J)
        write_csv(d / "sweep_M.csv", ["M", "Q0_bits", "lap_J", "total_J", "benchmark_lap_J"], rows)
        plot_spec(d / "sweep_M.plot.json", "Total energy over M laps", "M", "total_J", "sweep_M.csv")
        best = min(rows, key=lambda r: r[3])
        print(json.dumps({"dir": str(d), "best_M": best[0], "best_total_J": best[3]}))
        return EXIT_OK
    if args.M is None and args.Q0 is None:
        raise InputError("give --M, --Q0 or --sweep-M")
    cp = cyclical.optimize_cyclical(s, Q=Q, Q0=args.Q0, M=args.M, pattern=args.pattern,
                                    theta=args.theta, finetune=not args.fast)
    plan = cp.lap
    lsc = cyclical.lap_scenario(s, cp.Q0, plan.trajectory.N, plan.horizon)
    rep = report_from_plan(plan, lsc, {"M": cp.M, "Q0_bits": cp.Q0, "total_J": cp.total_energy_J,
                                       "benchmark_lap_J": cp.init_energy_J,
                                       "pattern": args.pattern, "theta_deg": cp.theta,
                                       "radius_m": cp.init.radius, "period_s": plan.horizon})
    save_report(rep, d)
    sca.save_iteration_log(plan, d / "iterations.csv")
    cyclical.save_search_trace(cp.trace, d / "search_trace.csv")
    stochastic.save_plan(stochastic.plan_from_fixed(plan, lsc), d / "plan.json")
    stochastic.save_plan(_benchmark_plan(s, cp), d / "benchmark_plan.json")
    print(json.dumps({"dir": str(d), "M": cp.M, "lap_J": cp.lap_energy_J, "total_J": cp.total_energy_J}))
    return EXIT_OK


def cmd_plan_sp(args) -> int:
    s = _scenario(args)
    d = run_dir(args, s)
    if args.init:
        init = stochastic.load_plan(args.init)
        lsc = _plan_scenario(s, init)
        q, ve, tau = init.q, init.v_e, init.tau
    elif s.closed:
        cp = _closed_plan(s, args, M=args.M or 1)
        lsc = cyclical.lap_scenario(s, cp.Q0, cp.lap.trajectory.N, cp.lap.horizon)
        q, ve, tau = cp.lap.trajectory.q, cp.lap.trajectory.v_e, cp.lap.tau
    else:
        fp = sca.plan_open(s, horizon=args.horizon)
        lsc = s.with_slotting(fp.trajectory.slot_s, fp.trajectory.N)
        q, ve, tau = fp.trajectory.q, fp.trajectory.v_e, fp.tau
    cfg = stochastic.SaaConfig(args.samples or s.saa_samples, args.seed, s.tolerances.eps1,
                               s.tolerances.eps2)
    plan = stochastic.solve_offline_sp(lsc, q, ve, tau, cfg)
    stochastic.save_plan(plan, d / "plan.json")
    write_csv(d / "iterations.csv", ["iteration", "objective_J", "surrogate_J", "max_violation"],
              [[r.iteration, repr(r.objective_J), repr(r.surrogate_J), repr(r.max_violation)]
               for r in plan.log])
    (d / "validation.json").write_text(json.dumps(plan.validation, indent=2))
    print(json.dumps({"dir": str(d), "objective_J": plan.objective_J,
                      "iterations": len(plan.log)}))
    return EXIT_OK


def _plan_scenario(s, plan):
    """Scenario slotted like the plan; a lap plan carries its own per-lap targets."""
    s2 = s.with_slotting(plan.slot_s, plan.N)
    if plan.targets is not None:
        s2 = s2.with_targets(list(plan.targets))
    if plan.mode == "closed":
        s2 = replace(s2, endpoints=None)
    return s2


def cmd_simulate(args) -> int:
    s = _scenario(args)
    if not Path(args.plan).exists():
        raise FileNotFoundError(args.plan)
    plan = stochastic.load_plan(args.plan)
    try:
        online.check_plan(plan, s)
    except ValueError as exc:
        raise InputError(f"plan/scenario mismatch: {exc}") from None
    d = run_dir(args, s, {"plan_sha256": hashlib.sha256(Path(args.plan).read_bytes()).hexdigest()})
    ps = _plan_scenario(s, plan)
    reports = online.run_ensemble(ps, plan, args.seeds, jobs=args.jobs)
    for r in reports:
        online.write_run_csv(r, d / f"run_seed{r.seed}.csv")
    online.write_ensemble_csv(reports, d / "ensemble.csv")
    stats = online.ensemble_stats(reports)
    (d / "ensemble_summary.json").write_text(json.dumps(stats, indent=2))
    plot_spec(d / "ensemble.plot.json", "HO2 energy per seed", "seed", "total_J", "ensemble.csv",
              kind="scatter")
    print(json.dumps({"dir": str(d), **stats}))
    return EXIT_OK


def cmd_sweep(args) -> int:
    s = _scenario(args)
    d = run_dir(args, s)
    rows = []
    if args.param == "wind_x":
        if s.closed:
            raise InputError("wind_x sweep needs an open scenario")
        for wx in args.values:
            sw = s.with_wind(mean=(wx, 0.0))
            plan = sca.plan_open(sw)
            V, T, E = sca.straight_benchmark(sw)
            rows.append([wx, plan.energy_J, E, plan.horizon])
        header = ["wind_x", "sca_J", "benchmark_J", "horizon_s"]
    elif args.param == "M":
        Q = float(s.targets.max())
        for M in args.values:
            cp = cyclical.optimize_cyclical(s, Q=Q, M=int(M), pattern=args.pattern, finetune=not args.fast)
            rows.append([int(M), cp.lap_energy_J, cp.total_energy_J])
        header = ["M", "lap_J", "total_J"]
    elif args.param == "theta":
        out = cyclical.orientation_sweep(s, float(s.targets.max()), thetas=args.values)
        for r in out:
            rows.append([r["theta0"], r["benchmark_J"], r["optimized_J"],
                         cyclical.lap_orientation(r["plan"].trajectory, s.wind.mean_vec)
                         if r["plan"] is not None else float("nan")])
        header = ["theta0_deg", "benchmark_J", "optimized_J", "lap_orientation_deg"]
    else:
        raise InputError(f"unknown sweep parameter {args.param}")
    write_csv(d / f"sweep_{args.param}.csv", header, rows)
    plot_spec(d / f"sweep_{args.param}.plot.json", f"Energy over {args.param}", header[0],
              header[1:], f"sweep_{args.param}.csv")
    print(json.dumps({"dir": str(d), "rows": len(rows)}))
    return EXIT_OK


def cmd_report(args) -> int:
    d = Path(args.run)
    if not (d / "manifest.json").exists():
        raise FileNotFoundError(str(d / "manifest.json"))
    manifest = json.loads((d / "manifest.json").read_text())
    print(f"command: {manifest['command']}  version: {manifest['version']}")
    for name in ("summary.json", "ensemble_summary.json", "validation.json"):
        p = d / name
        if p.exists():
            data = json.loads(p.read_text())
            print(f"[{name}]")
            for k, v in data.items():
                if k in ("diagnostics",):
                    for k2, v2 in v.items():
                        if not isinstance(v2, list):
                            print(f"  {k}.{k2}: {v2}")
                    continue
                print(f"  {k}: {v}")
    for p in sorted(d.glob("sweep_*.csv")):
        print(f"[{p.name}]")
        print(p.read_text().rstrip())
    return EXIT_OK


# parser ------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="windplan", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, scenario=True):
        if scenario:
            sp.add_argument("scenario", help="scenario JSON file")
        sp.add_argument("--out", help=f"output root (default ${OUT_ENV} or ./runs)")

    sp = sub.add_parser("plan-fixed", help="fixed-wind SCA plan")
    common(sp)
    sp.add_argument("--wind", type=vec2, help="constant wind vx,vy (m/s)")
    sp.add_argument("--horizon", type=float, help="mission time T (s); searched when omitted")
    sp.add_argument("--pattern", choices=("circle", "eight"), default="circle",
                    help="lap shape for closed scenarios")
    sp.add_argument("--theta", type=float, help="8-shape orientation (deg); searched when omitted")
    sp.add_argument("--fast", action="store_true", help="skip the period/orientation fine-tune")
    sp.set_defaults(func=cmd_plan_fixed)

    sp = sub.add_parser("plan-cyclical", help="cyclical lap plan")
    common(sp)
    sp.add_argument("--pattern", choices=("circle", "eight"), default="circle")
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--Q0", type=float, help="bits per lap")
    g.add_argument("--M", type=int, help="number of laps")
    g.add_argument("--sweep-M", type=float_list, help="comma-separated lap counts")
    sp.add_argument("--wind", type=vec2)
    sp.add_argument("--theta", type=float)
    sp.add_argument("--fast", action="store_true")
    sp.set_defaults(func=cmd_plan_cyclical)

    sp = sub.add_parser("plan-sp", help="stochastic (SAA) offline plan")
    common(sp)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--samples", type=int, help="SAA sample count (default from scenario)")
    sp.add_argument("--sigma", type=float, help="override wind sigma_f")
    sp.add_argument("--init", help="plan.json from plan-fixed / plan-cyclical to start from")
    sp.add_argument("--pattern", choices=("circle", "eight"), default="circle")
    sp.add_argument("--M", type=int)
    sp.add_argument("--theta", type=float)
    sp.add_argument("--horizon", type=float)
    sp.add_argument("--fast", action="store_true")
    sp.set_defaults(func=cmd_plan_sp)

    sp = sub.add_parser("simulate", help="closed-loop HO2 runs")
    common(sp)
    sp.add_argument("--plan", required=True)
    sp.add_argument("--seeds", type=seed_range, required=True, help="a..b inclusive")
    sp.add_argument("--sigma", type=float, help="override wind sigma_f")
    sp.add_argument("--jobs", type=int, default=1)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("sweep", help="parameter sweep emitting CSV series")
    common(sp)
    sp.add_argument("--param", choices=("wind_x", "M", "theta"), required=True)
    sp.add_argument("--values", type=float_list, required=True)
    sp.add_argument("--pattern", choices=("circle", "eight"), default="circle")
    sp.add_argument("--fast", action="store_true")
    sp.add_argument("--jobs", type=int, default=1)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("report", help="print a run directory's summaries")
    sp.add_argument("run")
    sp.set_defaults(func=cmd_report, out=None)
    return p


def _error(kind, exc, code, path=None) -> int:
    rec = {"error": kind, "message": str(exc), "exit_code": code}
    if path:
        rec["path"] = str(path)
    print(json.dumps(rec), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        return _error("input", f"file not found: {exc.filename or exc}", EXIT_INPUT,
                      exc.filename or str(exc))
    except (ScenarioError, InputError) as exc:
        return _error("input", exc, EXIT_INPUT)
    except cyclical.NoFeasibleInit as exc:
        return _error("infeasible", exc, EXIT_INFEASIBLE)
    except sca.InitInfeasible as exc:
        return _error("infeasible", exc, EXIT_INFEASIBLE)
    except sca.SubproblemFailure as exc:
        return _error("solver", exc, EXIT_SOLVER)


if __name__ == "__main__":
    sys.exit(main())
