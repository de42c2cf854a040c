import json
import subprocess
import sys
from dataclasses import replace

import numpy as np
import pytest

from satbackstep import KernelSet
from satbackstep.cli import main
from satbackstep.scenario import (
    BUNDLED, InitialSpec, SimulationSpec, bundled_scenario, load_scenario,
)
from satbackstep.simulator import CFLError


@pytest.mark.parametrize("name", sorted(BUNDLED))
def test_bundled_scenarios_round_trip(name, tmp_path):
    sc = load_scenario(name)
    path = tmp_path / "s.json"
    sc.to_json(path)
    back = load_scenario(str(path))
    assert back.to_dict() == sc.to_dict()
    assert back.plant.delay_profile == sc.plant.delay_profile


def test_scenario_validation():
    sc = load_scenario("example1")
    with pytest.raises(CFLError):
        sc.with_grid(dt=1e-3).__post_init__()
    with pytest.raises(ValueError):
        replace(sc, tuning={"delta": 0.3})
    with pytest.raises(ValueError):
        replace(sc, simulation=SimulationSpec(initial=InitialSpec(X=(1.0, 2.0))))
    with pytest.raises(KeyError):
        bundled_scenario("no-such-scenario")


def test_initial_spec_values_and_norms():
    spec = InitialSpec.from_dict({"X": [0.5], "u": list(np.linspace(0, 1, 26))})
    assert spec.kind == "values"
    norms = spec.norms(0.04)
    assert norms["X0_max"] == 0.5
    assert norms["u0_norm_sq"] == pytest.approx(1 / 3, abs=1e-3)
    assert norms["u0_deriv_norm_sq"] == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(ValueError):
        spec.field(0.1)


def short(name, tmp_path, T=0.5, **sim):
    sc = load_scenario(name)
    sc = replace(sc, simulation=replace(sc.simulation, T=T, **sim))
    path = tmp_path / f"{name}.json"
    sc.to_json(path)
    return str(path)


def test_design_simulate_report_feasible(tmp_path, capsys):
    scen = short("example1-matched", tmp_path, T=1.0, record_stride=10)
    out = str(tmp_path / "run")
    assert main(["design", "--scenario", scen, "--out", out]) == 0
    cert = json.loads((tmp_path / "run" / "certificate.json").read_text())
    assert cert["feasible"] and cert["admissible_set"]["radius"] == pytest.approx(1 / cert["beta"])
    assert main(["simulate", "--scenario", scen, "--out", out]) == 0
    summary = json.loads((tmp_path / "run" / "summary.json").read_text())
    assert summary["membership"]["inside"]
    assert summary["halanay_violations"] == 0
    assert (tmp_path / "run" / "trajectory.csv").exists()
    assert (tmp_path / "run" / "fields.csv").exists()
    capsys.readouterr()
    assert main(["report", "--out", out]) == 0
    text = capsys.readouterr().out
    assert "beta" in text and "simulation: completed" in text


def test_design_infeasible_exit_code(tmp_path, capsys):
    assert main(["design", "--scenario", "example1", "--out", str(tmp_path)]) == 2
    cert = json.loads((tmp_path / "certificate.json").read_text())
    assert cert["status"] == "infeasible" and cert["admissible_set"]["radius"] is None
    assert "diagnostic" in capsys.readouterr().err


def test_simulate_with_infeasible_certificate(tmp_path):
    scen = short("example1", tmp_path, record_stride=50)
    main(["design", "--scenario", scen, "--out", str(tmp_path)])
    assert main(["simulate", "--scenario", scen, "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["membership"] is None and "infeasible" in summary["membership_note"]


def test_missing_artifacts_exit_code(tmp_path):
    assert main(["simulate", "--scenario", "example1", "--out", str(tmp_path)]) == 4
    assert main(["report", "--out", str(tmp_path)]) == 4
    assert main(["verify-kernels", "--scenario", "example1",
                 "--kernels", str(tmp_path / "nope.json")]) == 4


def test_internal_error_exit_code(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{}")
    assert main(["design", "--scenario", str(bad), "--out", str(tmp_path)]) == 1


@pytest.mark.parametrize("name", ["example1", "example2"])
def test_verify_kernels_passes(name, tmp_path):
    assert main(["verify-kernels", "--scenario", name, "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "verification.json").read_text())
    assert report["all_pass"]
    assert {"kernel.q_pde", "transform.u_w_u", "controller.dual_representation",
            "simulation.dual_target"} <= set(report["properties"])


def test_corrupted_kernels_fail_verification(tmp_path, ex1_kernels):
    d = json.loads(ex1_kernels.to_json())
    q = np.array(d["tables"]["q"])
    q[10, 10] += 1e-3
    d["tables"]["q"] = q.tolist()
    path = tmp_path / "kernels.json"
    path.write_text(json.dumps(d))
    assert main(["verify-kernels", "--scenario", "example1", "--kernels", str(path)]) == 5


def test_zero_reaction_sum_scenario(tmp_path):
    sc = load_scenario("example1")
    sc = replace(sc, plant=sc.plant.replace(a=-0.8))
    path = tmp_path / "s.json"
    sc.to_json(path)
    out = tmp_path / "run"
    assert main(["design", "--scenario", str(path), "--out", str(out)]) in (0, 2, 3)
    ks = KernelSet.from_json(str(out / "kernels.json"))
    assert np.all(ks.q == 0) and np.all(ks.l == 0)
    assert main(["verify-kernels", "--scenario", str(path), "--kernels",
                 str(out / "kernels.json")]) == 0


def test_console_script_entry_point():
    res = subprocess.run([sys.executable, "-m", "satbackstep.cli", "--help"],
                         capture_output=True, text=True)
    assert res.returncode == 0
    for cmd in ("design", "simulate", "verify-kernels", "report"):
        assert cmd in res.stdout
