import csv
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
import yaml

from vectorsched.adjoint import value_and_gradient
from vectorsched.cli import main
from vectorsched.results import read_json, validate_result
from vectorsched.scenario import ConfigError, load_mismatch, load_scenario

ROOT = Path(__file__).resolve().parents[1]
SCENARIOS = ROOT / "scenarios"

SMALL = {
    "environment": {"synthetic": {"mean_c": 24.75, "amplitude_c": 4.5, "coldest_day_of_year": 20}},
    "population": {"substates": 4, "dt_days": 0.05, "horizon_days": 120, "c0": 10000},
    "schedule": [
        {"kind": "adulticide", "timing_days": 40, "efficacy_per_day": 0.3, "duration_days": 5},
        {"kind": "larvicide", "timing_days": 60, "efficacy_per_day": 0.5, "duration_days": 7},
    ],
    "optimizer": {"restarts": 2, "max_iters": 60},
    "mpc": {"epoch_days": 10, "fresh_restarts": 0},
}


def write(tmp_path, doc, name="scenario.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(doc))
    return p


def rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


@pytest.mark.parametrize("name", sorted(p.name for p in SCENARIOS.glob("*.yaml") if "overestimate" not in p.name))
def test_shipped_scenarios_load(name):
    sc = load_scenario(SCENARIOS / name)
    assert sc.config.n_steps > 0


def test_combined_scenario_has_fourteen_timings():
    cfg = load_scenario(SCENARIOS / "combined.yaml").config
    kinds = [iv.kind.value for iv in cfg.schedule]
    assert len(cfg.schedule.free_indices) == 14
    assert kinds.count("adulticide") == 8 and kinds.count("larvicide") == 5 and kinds.count("habitat_elimination") == 1


def test_mismatch_file():
    m = load_mismatch(SCENARIOS / "adulticide_overestimate.yaml")
    assert m.adulticide_efficacy == 2.0 and m.larvicide_efficacy == 1.0


def test_simulate_baseline(tmp_path):
    assert main(["simulate", "--scenario", str(SCENARIOS / "baseline.yaml"), "--out", str(tmp_path)]) == 0
    table = rows(tmp_path / "trajectory.csv")
    assert table[0] == ["t", "E_total", "L_total", "P_total", "A_total", "R0"]
    assert len(table) - 1 == 365 / 0.05 + 1
    summary = read_json(tmp_path / "summary.json")
    validate_result(summary, "summary")
    assert summary["F"] > 0


def test_simulate_combined_end_to_end(tmp_path):
    assert main(["simulate", "--scenario", str(SCENARIOS / "combined.yaml"), "--out", str(tmp_path)]) == 0


@pytest.mark.parametrize(
    "patch, where",
    [
        ({"population": {"substates": 4, "dt_day": 0.1}}, "population"),
        ({"population": {"substates": "four"}}, "population/substates"),
        ({"schedule": [{"kind": "larvicide", "efficacy_per_day": 0.5}]}, "schedule/0"),
        ({"schedule": [{"kind": "larvicide", "efficacy_fraction": 0.5, "duration_days": 2}]}, "schedule/0"),
        ({"rates": {"dev_egg_per_day": [[20, -0.1]]}}, "rates/dev_egg_per_day"),
        ({"environment": {"temperature_csv": "nope.csv"}}, "environment/temperature_csv"),
    ],
)
def test_config_errors_name_the_field(tmp_path, capsys, patch, where):
    doc = {**SMALL, **patch}
    code = main(["simulate", "--scenario", str(write(tmp_path, doc)), "--out", str(tmp_path)])
    assert code == 2
    assert where in capsys.readouterr().err


def test_config_error_type():
    with pytest.raises(ConfigError) as info:
        from vectorsched.scenario import build_scenario
        build_scenario({"population": {"horizon_days": 10.01, "dt_days": 0.05}})
    assert info.value.path == "population"


def test_gradcheck_desk_passes(tmp_path):
    assert main(["gradcheck", "--scenario", str(SCENARIOS / "desk_gradcheck.yaml"), "--out", str(tmp_path)]) == 0
    report = read_json(tmp_path / "gradcheck.json")
    validate_result(report, "gradcheck")
    assert report["passed"] and len(report["parameters"]) == 3


def test_gradcheck_unreachable_threshold_fails(tmp_path):
    code = main(["gradcheck", "--scenario", str(SCENARIOS / "desk_gradcheck.yaml"), "--out", str(tmp_path),
                 "--threshold", "1e-12"])
    assert code == 4


def test_gradcheck_zero_efficacy(tmp_path):
    doc = {**SMALL, "schedule": [{"kind": "adulticide", "timing_days": 40, "efficacy_per_day": 0.0, "duration_days": 5}]}
    assert main(["gradcheck", "--scenario", str(write(tmp_path, doc)), "--out", str(tmp_path)]) == 0
    report = read_json(tmp_path / "gradcheck.json")
    assert report["parameters"][0]["adjoint"] == 0.0 and report["parameters"][0]["finite_diff"] == 0.0


def test_optimize_interior_stationary_point(tmp_path):
    doc = {**SMALL, "schedule": [{"kind": "larvicide", "efficacy_per_day": 0.8, "duration_days": 7}]}
    path = write(tmp_path, doc)
    assert main(["optimize", "--scenario", str(path), "--out", str(tmp_path)]) == 0
    res = read_json(tmp_path / "result.json")
    validate_result(res, "optimization")
    p = res["best_timings"][0]
    assert 0 < p < 113
    cfg = load_scenario(path).config.with_free_timings([p])
    _, g = value_and_gradient(cfg)
    _, g_start = value_and_gradient(load_scenario(path).config)
    assert abs(g[0]) < 1e-3 * abs(g_start[0])
    assert len(rows(tmp_path / "risk.csv")) - 1 == cfg.n_steps + 1


def test_optimize_sorts_identical_timings(tmp_path):
    doc = {**SMALL, "schedule": [{"kind": "adulticide", "efficacy_per_day": 0.3, "duration_days": 3, "count": 3}]}
    assert main(["optimize", "--scenario", str(write(tmp_path, doc)), "--out", str(tmp_path)]) == 0
    for rec in read_json(tmp_path / "result.json")["restarts"]:
        assert rec["final_timings"] == sorted(rec["final_timings"])


def test_optimize_reproducible_bytes(tmp_path):
    path = write(tmp_path, SMALL)
    outs = [tmp_path / "a", tmp_path / "b"]
    for out in outs:
        assert main(["optimize", "--scenario", str(path), "--out", str(out), "--restarts", "1", "--seed", "7"]) == 0
    for name in ("result.json", "risk.csv"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_mpc_matches_optimize(tmp_path):
    path = write(tmp_path, SMALL)
    assert main(["optimize", "--scenario", str(path), "--out", str(tmp_path / "opt")]) == 0
    best = read_json(tmp_path / "opt" / "result.json")
    planned = {**SMALL, "schedule": [dict(item, timing_days=t) for item, t in zip(SMALL["schedule"], best["best_timings"])]}
    assert main(["mpc", "--scenario", str(write(tmp_path, planned, "planned.yaml")), "--out", str(tmp_path / "mpc")]) == 0
    res = read_json(tmp_path / "mpc" / "closed_loop.json")
    validate_result(res, "closed_loop")
    assert np.max(np.abs(np.subtract(res["executed_timings"], best["best_timings"]))) <= 0.5
    assert res["realized_F"] == pytest.approx(best["best_F"], rel=0.01)


def test_mpc_with_noise_logs_every_epoch(tmp_path):
    path = write(tmp_path, SMALL)
    code = main(["mpc", "--scenario", str(path), "--out", str(tmp_path), "--obs-sigma", "0.3", "--seed", "2",
                 "--mismatch", str(SCENARIOS / "adulticide_overestimate.yaml"), "--compare-open-loop"])
    assert code == 0
    table = rows(tmp_path / "epochs.csv")
    assert len(table) - 1 == 12
    assert all(r[2] != "" for r in table[2:])
    validate_result(read_json(tmp_path / "closed_loop.json"), "closed_loop")


def test_mpc_missing_mismatch_file(tmp_path, capsys):
    code = main(["mpc", "--scenario", str(write(tmp_path, SMALL)), "--out", str(tmp_path), "--mismatch", "missing.yaml"])
    assert code == 2
    assert "missing.yaml" in capsys.readouterr().err


def test_emit_profiles(tmp_path):
    assert main(["emit-profiles", "--scenario", str(SCENARIOS / "desk_gradcheck.yaml"), "--out", str(tmp_path)]) == 0
    table = rows(tmp_path / "profiles.csv")
    assert table[0] == ["t", "larvicide_mortality", "adulticide_mortality", "carrying_capacity"]
    values = np.array(table[1:], dtype=float)
    assert values[:, 1].max() == pytest.approx(0.5, rel=1e-3)
    # recovery starts during the onset, so the dip stays slightly above 0.7 * c0
    assert 7000 <= values[:, 3].min() <= 7000 * 1.035


def test_numerical_failure_exit_code(tmp_path):
    doc = {**SMALL, "schedule": [{"kind": "habitat_elimination", "timing_days": 30, "efficacy_fraction": 0.9,
                                  "recovery_time_days": 500, "count": 2}]}
    assert main(["simulate", "--scenario", str(write(tmp_path, doc)), "--out", str(tmp_path)]) == 3


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "vectorsched", "simulate", "--scenario", str(write(tmp_path, SMALL)),
                          "--out", str(tmp_path)], capture_output=True, text=True)
    assert out.returncode == 0 and "F =" in out.stdout
