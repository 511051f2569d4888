import hashlib
import json
import os

import pytest

from IBNLSLab.config import parse_config
from IBNLSLab.core.runner import ExperimentRunner
from IBNLSLab.data.csv_exporter import CSVExporter
from IBNLSLab.errors import EXIT_OK, EXIT_CONFIG
from IBNLSLab.main import main


def _raw(experiment, **sections):
    raw = {"experiment": experiment, "params": {"d": 1, "b": 0.25, "alpha": 8},
           "grid": {"n_points": 1024, "half_width": 32.0}}
    raw.update(sections)
    return raw


def _run(raw, out_dir, checkpoint=None):
    runner = ExperimentRunner(parse_config(raw, overrides={"out_dir": str(out_dir)}))
    return runner, runner.run(checkpoint=checkpoint)


def _summary(out_dir):
    with open(os.path.join(out_dir, "summary.json")) as f:
        return json.load(f)


def test_groundstate_run_writes_a_complete_manifest(tmp_path):
    runner, code = _run(_raw("groundstate", groundstate={"rescale_omegas": [2.0]}), tmp_path)
    assert code == EXIT_OK
    for name in ("config.yaml", "summary.json", "run.log", "ground_state.bin", "scaling.csv", "manifest.json"):
        assert (tmp_path / name).exists()

    with open(tmp_path / "manifest.json") as f:
        files = json.load(f)["files"]
    assert files[-1] == {"path": "manifest.json", "bytes": None, "sha256": None}
    listed = {entry["path"] for entry in files}
    assert listed == {p.name for p in tmp_path.iterdir()}
    for entry in files[:-1]:
        assert entry["sha256"] == hashlib.sha256((tmp_path / entry["path"]).read_bytes()).hexdigest()

    summary = _summary(tmp_path)
    assert summary["exit_code"] == 0 and summary["error"] is None
    assert 0.5 < summary["results"]["lambda0"] < 2.0
    assert summary["results"]["scaling"]["max_rel_defect"] < 1e-4
    assert summary["results"]["ground_state"]["origin_corrected"]
    assert "m_threshold" in runner.headline
    assert "Starting groundstate run" in (tmp_path / "run.log").read_text(encoding="utf-8")


def test_resume_matches_an_uninterrupted_run(tmp_path):
    def raw(t_end):
        return _raw("evolve", integrator={"dt": 1e-3, "t_end": t_end, "snapshot_stride": 20},
                    initial={"family": "gaussian", "amplitude": 0.8})

    assert _run(raw(0.2), tmp_path / "full")[1] == EXIT_OK
    assert _run(raw(0.1), tmp_path / "first")[1] == EXIT_OK
    _, code = _run(raw(0.2), tmp_path / "second", checkpoint=str(tmp_path / "first" / "checkpoint.bin"))
    assert code == EXIT_OK
    assert (tmp_path / "second" / "checkpoint.bin").read_bytes() == (tmp_path / "full" / "checkpoint.bin").read_bytes()
    assert _summary(tmp_path / "second")["experiment"] == "resume"
    trajectory = CSVExporter.load(str(tmp_path / "second" / "trajectory.csv"))
    assert trajectory["t"].iloc[0] == pytest.approx(0.1)


def test_resume_with_another_step_is_a_config_error(tmp_path):
    base = {"t_end": 0.02, "snapshot_stride": 10}
    _run(_raw("evolve", integrator={"dt": 1e-3, **base}), tmp_path / "first")
    runner, code = _run(_raw("evolve", integrator={"dt": 5e-4, **base}), tmp_path / "second",
                        checkpoint=str(tmp_path / "first" / "checkpoint.bin"))
    assert code == EXIT_CONFIG
    assert runner.error["type"] == "ConfigHashMismatch"


def test_missing_checkpoint_is_a_config_error(tmp_path):
    _, code = _run(_raw("evolve", integrator={"dt": 1e-3, "t_end": 0.01}), tmp_path,
                   checkpoint=str(tmp_path / "absent.bin"))
    assert code == EXIT_CONFIG
    assert _summary(tmp_path)["error"]["type"] == "FileNotFoundError"


def test_classify_finds_where_a_plus_ends(tmp_path):
    raw = _raw("classify", initial={"family": "scaled-ground-state"},
               classifier={"scales": [1.5, 0.5, 1.0, 0.9]})
    raw["params"]["alpha"] = 12
    runner, code = _run(raw, tmp_path)
    assert code == EXIT_OK
    assert runner.results["first_c_outside_a_plus"] == 1.0
    assert runner.results["n_samples"] == 4
    table = CSVExporter.load(str(tmp_path / "classify.csv"))
    assert table["c"].tolist() == [0.5, 0.9, 1.0, 1.5]


def test_audit_needs_the_standard_gauge(tmp_path):
    raw = _raw("audit", classifier={"scales": [0.5]})
    raw["params"]["mu"] = 0.5
    runner, code = _run(raw, tmp_path)
    assert code == EXIT_CONFIG
    assert runner.error["type"] == "WrongGauge"


def test_audit_of_scaled_ground_states(tmp_path):
    raw = _raw("audit", classifier={"scales": [0.5, 0.9, 1.5]})
    raw["params"]["alpha"] = 12
    runner, code = _run(raw, tmp_path)
    assert code == EXIT_OK
    assert runner.results["n_samples"] == 3
    assert runner.results["disagreements_outside_band"] == 0


def test_lorentz_calibration_in_one_dimension(tmp_path):
    runner, code = _run(_raw("lorentz-check"), tmp_path)
    assert code == EXIT_OK
    assert runner.results["monotone"] and runner.results["lebesgue_ok"]
    assert len(CSVExporter.load(str(tmp_path / "lorentz.csv"))) == 4


def test_virial_check_on_a_smooth_weight(tmp_path):
    raw = _raw("virial-check", integrator={"dt": 1e-4, "t_end": 0.01, "snapshot_stride": 10},
               virial={"R": 12.0})
    raw["grid"] = {"n_points": 512, "half_width": 32.0, "eps_reg": 0.5}
    runner, code = _run(raw, tmp_path)
    assert code == EXIT_OK
    assert runner.results["evolve_verdict"] == "completed"
    assert (tmp_path / "virial.csv").exists()


def test_sweep_reports_failed_points(tmp_path):
    raw = _raw("sweep", sweep={"experiment": "groundstate", "axes": {"b": [0.25, 1.5]}, "parallel": 1})
    raw["grid"] = {"n_points": 1024, "half_width": 32.0}
    runner, code = _run(raw, tmp_path)
    assert code == EXIT_CONFIG
    table = CSVExporter.load(str(tmp_path / "sweep.csv"))
    assert table["status"].tolist() == ["ok", "failed"]
    assert table["exit_code"].tolist() == [0, 2]
    assert (tmp_path / "point_000" / "ground_state.bin").exists()
    assert runner.results == {"n_points": 2, "n_failed": 1}


def test_command_line_exit_codes(tmp_path):
    config = tmp_path / "gs.yaml"
    config.write_text("experiment: groundstate\nparams: {d: 1, b: 0.25, alpha: 8}\n"
                      "grid: {n_points: 1024, half_width: 32.0}\n")
    assert main(["groundstate", "--config", str(config), "--out", str(tmp_path / "out"), "--seed", "4"]) == EXIT_OK
    assert _summary(tmp_path / "out")["seed"] == 4
    assert main(["groundstate", "--config", str(tmp_path / "absent.yaml")]) == EXIT_CONFIG
    config.write_text("experiment: groundstate\nparams: {d: 1, b: 0.25}\ngrid: {n_points: 512, half_width: 32.0}\n")
    assert main(["groundstate", "--config", str(config), "--out", str(tmp_path / "bad")]) == EXIT_CONFIG


def test_flow_invariance_diagnostic_reports_coercivity(tmp_path):
    raw = _raw("evolve", integrator={"dt": 1e-4, "t_end": 0.01, "snapshot_stride": 20},
               initial={"family": "scaled-ground-state", "scale": 0.8}, diagnostics=["flow-invariance"])
    raw["params"]["alpha"] = 12
    runner, code = _run(raw, tmp_path)
    assert code == EXIT_OK
    flow = runner.results["diagnostics"]["flow-invariance"]
    assert flow["passed"] and flow["stayed_a_plus"]
    assert flow["min_coercivity"] > 0
    table = CSVExporter.load(str(tmp_path / "flow_invariance.csv"))
    assert (table["coercivity"] > 0).all()
