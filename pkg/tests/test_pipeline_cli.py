import csv
import json

import pytest
from conftest import micro, straight

from vstc.cli import comparison_rows, main
from vstc.corridor_model import build_model
from vstc.baseline_stc import build_stc_model, waypoint_plan
from vstc.mip_solver import solve_mip
from vstc.corridor_model import extract_corridors
from vstc.pipeline import PlanConfig, PlanResult, plan, plan_vstc
from vstc.scenario import dump_scenario


@pytest.fixture
def micro_file(tmp_path):
    f = tmp_path / "micro.json"
    dump_scenario(micro(), f)
    return f


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_straight_vstc_pipeline_passes():
    r = plan_vstc(straight(), PlanConfig(node_limit=0))
    assert r.passed, r.message
    assert r.summary()["status"] == "ok"
    assert {rep.check for rep in r.reports} >= {"corridor_safety", "trajectory[1]", "vehicle_separation"}


def test_unknown_method_is_rejected():
    with pytest.raises(ValueError):
        plan(straight(), "rrt")


def test_plan_writes_artifacts(micro_file, tmp_path):
    out = tmp_path / "run"
    assert main(["plan", "--scenario", str(micro_file), "--node-limit", "0", "--out", str(out)]) == 0
    cor = rows(out / "vstc_corridors.csv")
    assert cor[0] == ["vehicle", "cube", "x_l", "x_u", "y_l", "y_u", "t_l", "t_u", "kept"]
    traj = rows(out / "vstc_trajectory_v1.csv")
    horizon = json.loads((out / "summary.json").read_text())["results"][0]["horizons"]["1"]
    assert len(traj) == round(horizon / 0.1) + 1 + 1
    assert (out / "vstc_validation.json").exists() and (out / "durations.csv").exists()


def test_export_records_and_stability(micro_file, tmp_path):
    run = tmp_path / "run"
    main(["plan", "--scenario", str(micro_file), "--node-limit", "0", "--out", str(run)])
    kept = [r for r in rows(run / "vstc_corridors.csv")[1:] if r[-1] == "1" and r[0] == "1"]
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["export", "--run", str(run), "--out", str(a)]) == 0
    assert main(["export", "--run", str(run), "--out", str(b)]) == 0
    cubes = rows(a / "vstc_cubes_v1.csv")
    assert cubes[0] == ["x_l", "x_u", "y_l", "y_u", "t_l", "t_u"]
    assert len(cubes) - 1 == len(kept) and all(len(r) == 6 for r in cubes)
    for f in sorted(a.iterdir()):
        assert f.read_bytes() == (b / f.name).read_bytes()
    traj = rows(a / "vstc_trajectory_v1.csv")
    assert len(traj) == len(rows(run / "vstc_trajectory_v1.csv"))


def test_export_needs_a_run(tmp_path):
    assert main(["export", "--run", str(tmp_path / "nothing"), "--out", str(tmp_path / "x")]) == 2


def test_bad_scenario_file_names_the_field(tmp_path, capsys):
    f = tmp_path / "file.bad"
    f.write_text('{"vehicles": [{"id": 1, "initial": [0, 0], "target": [10, 0], "v_initial": 99}]}')
    assert main(["plan", "--scenario", str(f), "--out", str(tmp_path / "o")]) == 2
    assert "vehicles[0].v_initial" in capsys.readouterr().err


@pytest.mark.parametrize(
    "extra",
    [
        ["--weights", "1,2,3"],
        ["--weights", "1,2,x,4,5"],
        ["--k", "0"],
        ["--time-limit", "-1"],
        ["--method", "astar"],
    ],
)
def test_config_errors_exit_2(micro_file, tmp_path, extra):
    assert main(["plan", "--scenario", str(micro_file), "--out", str(tmp_path / "o")] + extra) == 2


def test_missing_scenario_and_external_backend(tmp_path, monkeypatch):
    monkeypatch.delenv("VSTC_EXTERNAL_SOLVER", raising=False)
    assert main(["plan", "--scenario", str(tmp_path / "nope.yaml"), "--out", str(tmp_path / "o")]) == 2
    assert main(["plan", "--scenario", "intersection", "--backend", "external", "--out", str(tmp_path / "o")]) == 2


def test_too_few_cubes_is_reported_with_its_stage(tmp_path, capsys):
    assert main(["plan", "--scenario", "intersection", "--k", "4", "--out", str(tmp_path / "o")]) == 1
    err = capsys.readouterr().err
    assert "corridor" in err and "4.000 s" in err
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["results"][0]["status"] == "infeasible"


def test_baseline_cubes_last_exactly_one_second(micro_file, tmp_path):
    out = tmp_path / "o"
    main(["plan", "--scenario", str(micro_file), "--method", "stc-baseline", "--node-limit", "100", "--out", str(out)])
    cor = rows(out / "stc-baseline_corridors.csv")[1:]
    assert cor and all(float(r[7]) - float(r[6]) == 1.0 for r in cor)


def test_comparison_marks_an_infeasible_baseline():
    vstc = plan_vstc(straight(), PlanConfig(node_limit=0))
    base = PlanResult("stc-baseline", stage="corridor", message="corridor: baseline model: infeasible")
    table = comparison_rows([vstc, base])
    assert table[-1][0] == "max" and table[-1][2] == "infeasible"
    assert comparison_rows([base.__class__("vstc", stage="corridor"), base])[0][1] == "infeasible"


def test_matching_fixed_steps_give_equal_horizons():
    s = straight()
    wp = waypoint_plan(s)
    n = wp.count(1)
    base = build_stc_model(s, wp)
    hinted = build_model(s, n, fixed_dt=wp.dt_fixed)
    hb = extract_corridors(base, solve_mip(base.to_lp_problem()))[0].horizon
    hv = extract_corridors(hinted, solve_mip(hinted.to_lp_problem()))[0].horizon
    assert hb == hv == n * wp.dt_fixed
