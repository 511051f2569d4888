import textwrap

import pytest

from IBNLSLab.config import parse_config, load_config, load_env
from IBNLSLab.errors import ConfigParseError

BASE = """\
experiment: evolve
params:
  d: 1
  b: 0.25
  alpha: 8
grid:
  n_points: 1024
  half_width: 32.0
integrator:
  dt: 1e-4
  t_end: 0.5
  snapshot_stride: 10
"""


def write(tmp_path, text, name="run.yaml"):
    path = tmp_path / name
    path.write_text(textwrap.dedent(text))
    return str(path)


def test_full_config_loads(tmp_path):
    cfg = load_config(write(tmp_path, BASE))
    assert cfg.experiment == "evolve"
    assert cfg.params.alpha == 8.0
    assert cfg.params.mu == 0.0 and cfg.params.kappa == 1
    assert cfg.grid == {"n_points": 1024, "half_width": 32.0, "shift": True, "eps_reg": None,
                        "origin_correction": True}
    # YAML 1.1 reads 1e-4 as a string
    assert cfg.integrator.dt == pytest.approx(1e-4)
    assert cfg.integrator.snapshot_stride == 10
    assert cfg.integrator.adapt == "none"
    assert cfg.classifier["tol_S"] == 1e-6
    assert cfg.classifier["tol_B"] == 1e-6
    assert cfg.groundstate["identity_tol"] == 1e-6


def test_missing_key_names_its_path(tmp_path):
    text = BASE.replace("  alpha: 8\n", "")
    with pytest.raises(ConfigParseError) as info:
        load_config(write(tmp_path, text))
    assert info.value.field == "params.alpha"
    assert "params.alpha" in str(info.value)


def test_bad_value_reports_its_line(tmp_path):
    text = BASE.replace("n_points: 1024", "n_points: lots")
    with pytest.raises(ConfigParseError) as info:
        load_config(write(tmp_path, text))
    assert info.value.field == "grid.n_points"
    assert info.value.line == 7


def test_invalid_yaml_reports_its_line(tmp_path):
    with pytest.raises(ConfigParseError) as info:
        load_config(write(tmp_path, "params:\n  d: [1, 2\ngrid: {}\n"))
    assert info.value.line is not None


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_config(str(tmp_path / "absent.yaml"))


def test_overrides_win(tmp_path):
    cfg = load_config(write(tmp_path, BASE + "seed: 3\n"),
                      {"seed": 9, "snapshot_stride": 4, "out_dir": str(tmp_path / "o")})
    assert cfg.seed == 9
    assert cfg.integrator.snapshot_stride == 4
    assert cfg.out_dir == str(tmp_path / "o")


def test_environment_defaults(tmp_path, monkeypatch):
    monkeypatch.setenv("IBNLS_SEED", "11")
    monkeypatch.setenv("IBNLS_OUT_DIR", str(tmp_path / "env_runs"))
    monkeypatch.setenv("IBNLS_LOG_LEVEL", "debug")
    assert load_env()["log_level"] == "DEBUG"
    cfg = load_config(write(tmp_path, BASE))
    assert cfg.seed == 11
    assert cfg.out_dir == str(tmp_path / "env_runs")
    assert load_config(write(tmp_path, BASE + "seed: 2\n", "seeded.yaml")).seed == 2


def test_checkpoint_hash_ignores_horizon_and_stride(tmp_path):
    a = load_config(write(tmp_path, BASE))
    b = load_config(write(tmp_path, BASE.replace("t_end: 0.5", "t_end: 2.0").replace("snapshot_stride: 10",
                                                                                   "snapshot_stride: 50"), "b.yaml"))
    c = load_config(write(tmp_path, BASE.replace("dt: 1e-4", "dt: 2e-4"), "c.yaml"))
    assert a.hash_section() == b.hash_section()
    assert a.hash_section() != c.hash_section()


def test_integrator_only_when_needed():
    raw = {"experiment": "groundstate", "params": {"d": 1, "b": 0.25, "alpha": 8},
           "grid": {"n_points": 256, "half_width": 16}}
    assert parse_config(raw).integrator is None
    with pytest.raises(ConfigParseError, match="integrator.dt"):
        parse_config(raw, overrides={"experiment": "evolve"})


@pytest.mark.parametrize("patch, field", [
    ({"experiment": "dance"}, "experiment"),
    ({"diagnostics": ["scatter", "astrology"]}, "diagnostics"),
    ({"initial": {"family": "from-file"}}, "initial.path"),
    ({"experiment": "virial-check", "integrator": {"dt": 1e-3, "t_end": 1.0}}, "virial.R"),
    ({"experiment": "sweep", "sweep": {"axes": {"zeta": [1, 2]}}}, "sweep.axes.zeta"),
])
def test_validation_failures(patch, field):
    raw = {"experiment": "groundstate", "params": {"d": 1, "b": 0.25, "alpha": 8},
           "grid": {"n_points": 256, "half_width": 16}}
    raw.update(patch)
    with pytest.raises(ConfigParseError) as info:
        parse_config(raw)
    assert info.value.field == field


def test_sweep_axes_are_coerced():
    raw = {"experiment": "sweep", "params": {"d": 1, "b": 0.25, "alpha": 8},
           "grid": {"n_points": 256, "half_width": 16},
           "sweep": {"experiment": "groundstate", "axes": {"b": [0.25, "0.5"], "d": [1]}, "parallel": 3}}
    cfg = parse_config(raw)
    assert cfg.sweep["axes"] == {"b": [0.25, 0.5], "d": [1]}
    assert cfg.parallel == 3


def test_with_params_keeps_raw_in_step():
    raw = {"experiment": "groundstate", "params": {"d": 1, "b": 0.25, "alpha": 8},
           "grid": {"n_points": 256, "half_width": 16}}
    cfg = parse_config(raw).with_params(alpha=10.0)
    assert cfg.params.alpha == 10.0
    assert cfg.raw["params"]["alpha"] == 10.0
    assert raw["params"]["alpha"] == 8
