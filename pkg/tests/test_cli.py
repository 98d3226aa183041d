import json
from pathlib import Path

import pytest

from windplan.cli import main, seed_range

ROOT = Path(__file__).resolve().parents[1]
SCEN = ROOT / "scenarios"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_seed_range_parsing():
    assert seed_range("5..5") == [5]
    assert seed_range("1..3") == [1, 2, 3]
    assert seed_range("7") == [7]


def test_missing_scenario_exit_code(capsys, tmp_path):
    code, _, err = run(capsys, "plan-fixed", tmp_path / "nope.json", "--out", tmp_path)
    assert code == 2
    rec = json.loads(err.strip().splitlines()[-1])
    assert rec["exit_code"] == 2 and "nope.json" in rec["path"]


def test_invalid_scenario_exit_code(capsys, tmp_path):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"buoys": []}))
    code, _, err = run(capsys, "plan-fixed", p, "--out", tmp_path)
    assert code == 2 and "buoys empty" in err


def test_oversized_lap_volume_exit_code(capsys, tmp_path):
    code, _, err = run(capsys, "plan-cyclical", SCEN / "circle_6gbit.json", "--Q0", "6e9",
                       "--fast", "--out", tmp_path)
    assert code == 3
    assert json.loads(err.strip().splitlines()[-1])["error"] == "infeasible"


def test_plan_fixed_open_flight(capsys, tmp_path):
    code, out, _ = run(capsys, "plan-fixed", SCEN / "chain.json", "--horizon", "60",
                       "--out", tmp_path)
    assert code == 0
    res = json.loads(out)
    d = Path(res["dir"])
    for name in ("manifest.json", "trajectory.csv", "schedule.csv", "summary.json",
                 "iterations.csv", "plan.json", "benchmark_plan.json"):
        assert (d / name).exists(), name
    assert res["energy_J"] > 0
    code, out, _ = run(capsys, "report", d)
    assert code == 0 and "energy_J" in out


@pytest.fixture(scope="module")
def lap_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli")
    code = main(["plan-cyclical", str(SCEN / "eight_lap.json"), "--M", "1", "--pattern", "eight",
                 "--fast", "--out", str(out)])
    assert code == 0
    return out, next(out.glob("plan-cyclical-*"))


def test_simulate_is_deterministic(capsys, lap_run):
    out, d = lap_run
    capsys.readouterr()
    args = ("simulate", SCEN / "eight_lap.json", "--plan", d / "plan.json", "--seeds", "5..5",
            "--out", out)
    code1, o1, _ = run(capsys, *args)
    r1 = Path(json.loads(o1)["dir"])
    first = {p.name: p.read_bytes() for p in r1.iterdir()}
    code2, o2, _ = run(capsys, *args)
    r2 = Path(json.loads(o2)["dir"])
    assert code1 == code2 == 0 and r1 == r2
    assert {p.name: p.read_bytes() for p in r2.iterdir()} == first
    assert "run_seed5.csv" in first and "ensemble_summary.json" in first


def test_benchmark_plan_struggles_in_strong_gusts(capsys, lap_run):
    out, d = lap_run
    capsys.readouterr()
    code, o, _ = run(capsys, "simulate", SCEN / "eight_lap.json", "--plan",
                     d / "benchmark_plan.json", "--seeds", "0..1", "--sigma", "2.0", "--out", out)
    assert code == 0
    assert json.loads(o)["infeasible_steps"] > 0


def test_plan_scenario_mismatch(capsys, lap_run, tmp_path):
    out, d = lap_run
    code, _, err = run(capsys, "simulate", SCEN / "multi_buoy.json", "--plan", d / "plan.json",
                       "--seeds", "1..1", "--out", tmp_path)
    assert code == 2 and "mismatch" in err
