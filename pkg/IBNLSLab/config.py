import copy
import os
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional

import yaml
from dotenv import load_dotenv

from IBNLSLab.errors import ConfigParseError
from IBNLSLab.models.params import PhysParams
from IBNLSLab.models.records import IntegratorConfig

EXPERIMENTS = ("groundstate", "evolve", "classify", "audit", "virial-check", "lorentz-check", "sweep")
INITIAL_FAMILIES = ("gaussian", "ring", "scaled-ground-state", "from-file", "random")
DIAGNOSTICS = ("scatter", "growth", "flow-invariance", "decay")

DEFAULT_SECTIONS = {
    "grid": {"shift": True, "eps_reg": None, "origin_correction": True},
    "integrator": {"snapshot_stride": 1, "dealias": False, "adapt": "none", "drift_threshold": 1e-5,
                   "max_halvings": 4, "nonlinear": True, "keep_fields": True, "tail_limit": 1e-3},
    "initial": {"family": "gaussian", "amplitude": 1.0, "width": 1.0, "radius": 4.0, "scale": 1.0,
                "path": None, "modes": 3},
    "groundstate": {"tol": 1e-10, "max_iter": 5000, "seed_width": 1.0, "rescale_omegas": [], "identity_tol": 1e-6},
    "classifier": {"tol_S": 1e-6, "tol_G": 1e-6, "tol_B": 1e-6,
                   "scales": [0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3, 1.4, 1.5],
                   "n_random": 0, "direct_rescale": False},
    "virial": {"R": None, "radial": False, "rtol": 1e-3, "support_tol": 1e-8, "growth_dyadic": 4, "growth_slack": 0.1},
    "lorentz": {"r": None, "rho": None, "n_points": [512, 1024, 2048, 4096], "half_width": 8.0, "tol": 0.02},
    "scatter": {"min_horizon": 20.0, "min_snapshots": 20, "cauchy_window": 4, "potential_ratio": 0.01,
                "lk_windows": 2, "lk_ratio": 0.5, "growth_factor": 3.0, "cauchy_floor": 1e-10},
    "sweep": {"experiment": "groundstate", "axes": {}},
    "diagnostics": [],
    "output": {},
}

_env_loaded = False


def load_env() -> Dict[str, Any]:
    """Environment defaults; .env is read once per process."""
    global _env_loaded
    if not _env_loaded:
        load_dotenv()
        _env_loaded = True
    return {
        "out_dir": os.getenv("IBNLS_OUT_DIR", "runs"),
        "log_level": os.getenv("IBNLS_LOG_LEVEL", "INFO").upper(),
        "parallel": int(os.getenv("IBNLS_PARALLEL", "1")),
        "seed": int(os.getenv("IBNLS_SEED", "0")),
    }


@dataclass
class RunConfig:
    experiment: str
    params: PhysParams
    grid: Dict[str, Any]
    integrator: Optional[IntegratorConfig]
    initial: Dict[str, Any]
    groundstate: Dict[str, Any]
    classifier: Dict[str, Any]
    virial: Dict[str, Any]
    lorentz: Dict[str, Any]
    scatter: Dict[str, Any]
    sweep: Dict[str, Any]
    diagnostics: List[str]
    out_dir: str
    seed: int
    parallel: int = 1
    log_level: str = "INFO"
    source: Optional[str] = None
    raw: Dict[str, Any] = field(default_factory=dict)

    def hash_section(self) -> dict:
        """The part of the configuration a checkpoint is bound to; t_end is left out on purpose."""
        section = {"params": self.params.to_dict(), "grid": dict(self.grid)}
        if self.integrator is not None:
            section["integrator"] = {
                "dt": self.integrator.dt,
                "dealias": self.integrator.dealias,
                "nonlinear": self.integrator.nonlinear,
            }
        return section

    def with_params(self, **changes) -> "RunConfig":
        raw = copy.deepcopy(self.raw)
        raw.setdefault("params", {}).update(changes)
        return replace(self, params=replace(self.params, **changes), raw=raw)


# ================================
# YAML helpers
# ================================

def _line_index(text: str) -> Dict[str, int]:
    """Dotted key path -> 1-based line of its value in the YAML source."""
    index = {}

    def walk(node, prefix):
        if isinstance(node, yaml.MappingNode):
            for key_node, value_node in node.value:
                path = f"{prefix}.{key_node.value}" if prefix else str(key_node.value)
                index[path] = key_node.start_mark.line + 1
                walk(value_node, path)

    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError:
        return index
    walk(root, "")
    return index


class _Reader:
    """Typed access to the raw mapping that reports failures against the key path and source line."""

    def __init__(self, raw: dict, lines: Dict[str, int]):
        self.raw = raw
        self.lines = lines

    def fail(self, message: str, path: str):
        raise ConfigParseError(message, field=path, line=self.lines.get(path))

    def section(self, name: str, required: bool = False) -> dict:
        value = self.raw.get(name)
        if value is None:
            if required:
                self.fail(f"missing required section '{name}'", name)
            value = {}
        if not isinstance(value, dict):
            self.fail(f"section '{name}' must be a mapping", name)
        merged = copy.deepcopy(DEFAULT_SECTIONS.get(name, {}))
        merged.update(value)
        return merged

    def get(self, section: dict, name: str, key: str, kind=float, required: bool = False, default=None):
        path = f"{name}.{key}"
        if key not in section or section[key] is None:
            if required:
                self.fail(f"missing required key '{path}'", path)
            return default
        return self.coerce(section[key], kind, path)

    def coerce(self, value, kind, path: str):
        if kind is bool:
            if isinstance(value, bool):
                return value
            self.fail(f"expected true/false, got {value!r}", path)
        if kind in (int, float):
            # YAML 1.1 reads 1e-4 (no dot) as a string
            if isinstance(value, bool):
                self.fail(f"expected a number, got {value!r}", path)
            try:
                number = float(value)
            except (TypeError, ValueError):
                self.fail(f"expected a number, got {value!r}", path)
            if kind is int:
                if number != int(number):
                    self.fail(f"expected an integer, got {value!r}", path)
                return int(number)
            return number
        if kind is str:
            return str(value)
        if kind is list:
            return list(value) if isinstance(value, (list, tuple)) else [value]
        return value


def parse_config(raw: dict, lines: Optional[Dict[str, int]] = None, source: Optional[str] = None,
                 overrides: Optional[dict] = None) -> RunConfig:
    """Validate a loaded YAML mapping into a RunConfig; CLI overrides win over YAML, YAML over env."""
    if not isinstance(raw, dict):
        raise ConfigParseError("configuration must be a YAML mapping")
    env = load_env()
    overrides = overrides or {}
    rd = _Reader(raw, lines or {})

    experiment = rd.coerce(overrides.get("experiment") or raw.get("experiment") or "", str, "experiment")
    if experiment not in EXPERIMENTS:
        rd.fail(f"experiment must be one of {', '.join(EXPERIMENTS)}; got '{experiment}'", "experiment")

    ps = rd.section("params", required=True)
    params = PhysParams(
        d=rd.get(ps, "params", "d", int, required=True),
        mu=rd.get(ps, "params", "mu", float, default=0.0),
        b=rd.get(ps, "params", "b", float, required=True),
        alpha=rd.get(ps, "params", "alpha", float, required=True),
        kappa=rd.get(ps, "params", "kappa", int, default=1),
        omega=rd.get(ps, "params", "omega", float, default=1.0),
    )

    gs = rd.section("grid", required=True)
    grid = {
        "n_points": rd.get(gs, "grid", "n_points", int, required=True),
        "half_width": rd.get(gs, "grid", "half_width", float, required=True),
        "shift": rd.get(gs, "grid", "shift", bool, default=True),
        "eps_reg": rd.get(gs, "grid", "eps_reg", float),
        "origin_correction": rd.get(gs, "grid", "origin_correction", bool, default=True),
    }

    integ = rd.section("integrator")
    integrator = None
    if experiment in ("evolve", "virial-check") or "dt" in (raw.get("integrator") or {}):
        stride = overrides.get("snapshot_stride") or rd.get(integ, "integrator", "snapshot_stride", int)
        integrator = IntegratorConfig(
            dt=rd.get(integ, "integrator", "dt", float, required=True),
            t_end=rd.get(integ, "integrator", "t_end", float, required=True),
            snapshot_stride=int(stride),
            dealias=rd.get(integ, "integrator", "dealias", bool),
            adapt=rd.get(integ, "integrator", "adapt", str),
            drift_threshold=rd.get(integ, "integrator", "drift_threshold", float),
            max_halvings=rd.get(integ, "integrator", "max_halvings", int),
            nonlinear=rd.get(integ, "integrator", "nonlinear", bool),
            keep_fields=rd.get(integ, "integrator", "keep_fields", bool),
            tail_limit=rd.get(integ, "integrator", "tail_limit", float),
        )

    initial = rd.section("initial")
    if initial["family"] not in INITIAL_FAMILIES:
        rd.fail(f"initial.family must be one of {', '.join(INITIAL_FAMILIES)}; got '{initial['family']}'",
                "initial.family")
    for key in ("amplitude", "width", "radius", "scale"):
        initial[key] = rd.get(initial, "initial", key, float)
    initial["modes"] = rd.get(initial, "initial", "modes", int)
    if initial["family"] == "from-file" and not initial.get("path"):
        rd.fail("initial.path is required for the from-file family", "initial.path")

    groundstate = rd.section("groundstate")
    groundstate["tol"] = rd.get(groundstate, "groundstate", "tol", float)
    groundstate["max_iter"] = rd.get(groundstate, "groundstate", "max_iter", int)
    groundstate["seed_width"] = rd.get(groundstate, "groundstate", "seed_width", float)
    groundstate["identity_tol"] = rd.get(groundstate, "groundstate", "identity_tol", float)
    groundstate["rescale_omegas"] = [rd.coerce(v, float, "groundstate.rescale_omegas")
                                     for v in rd.coerce(groundstate["rescale_omegas"], list, "groundstate")]

    classifier = rd.section("classifier")
    for key in ("tol_S", "tol_G", "tol_B"):
        classifier[key] = rd.get(classifier, "classifier", key, float)
    classifier["scales"] = [rd.coerce(v, float, "classifier.scales") for v in classifier["scales"]]
    classifier["n_random"] = rd.get(classifier, "classifier", "n_random", int)
    classifier["direct_rescale"] = rd.get(classifier, "classifier", "direct_rescale", bool)

    virial = rd.section("virial")
    for key in ("R", "rtol", "support_tol", "growth_slack"):
        virial[key] = rd.get(virial, "virial", key, float)
    virial["growth_dyadic"] = rd.get(virial, "virial", "growth_dyadic", int)
    virial["radial"] = rd.get(virial, "virial", "radial", bool)
    if experiment == "virial-check" and virial["R"] is None:
        rd.fail("missing required key 'virial.R'", "virial.R")

    lorentz = rd.section("lorentz")
    for key in ("r", "rho", "half_width", "tol"):
        lorentz[key] = rd.get(lorentz, "lorentz", key, float)
    lorentz["n_points"] = [rd.coerce(v, int, "lorentz.n_points") for v in lorentz["n_points"]]

    scatter = rd.section("scatter")
    for key in ("min_horizon", "potential_ratio", "lk_ratio", "growth_factor", "cauchy_floor"):
        scatter[key] = rd.get(scatter, "scatter", key, float)
    for key in ("min_snapshots", "cauchy_window", "lk_windows"):
        scatter[key] = rd.get(scatter, "scatter", key, int)

    sweep = rd.section("sweep")
    if experiment == "sweep":
        if sweep["experiment"] not in EXPERIMENTS or sweep["experiment"] == "sweep":
            rd.fail(f"sweep.experiment must name a single experiment; got '{sweep['experiment']}'",
                    "sweep.experiment")
        if not isinstance(sweep["axes"], dict):
            rd.fail("sweep.axes must map parameter names to value lists", "sweep.axes")
        for name, values in sweep["axes"].items():
            if name not in ("d", "mu", "b", "alpha", "kappa", "omega"):
                rd.fail(f"unknown sweep axis '{name}'", f"sweep.axes.{name}")
            kind = int if name in ("d", "kappa") else float
            sweep["axes"][name] = [rd.coerce(v, kind, f"sweep.axes.{name}") for v in rd.coerce(values, list, name)]

    diagnostics = rd.coerce(raw.get("diagnostics") or [], list, "diagnostics")
    for item in diagnostics:
        if item not in DIAGNOSTICS:
            rd.fail(f"unknown diagnostic '{item}'; choose from {', '.join(DIAGNOSTICS)}", "diagnostics")

    output = rd.section("output")
    out_dir = overrides.get("out_dir") or output.get("dir") or env["out_dir"]
    seed = overrides.get("seed")
    if seed is None:
        seed = rd.coerce(raw["seed"], int, "seed") if raw.get("seed") is not None else env["seed"]
    parallel = overrides.get("parallel") or rd.get(sweep, "sweep", "parallel", int) or env["parallel"]

    return RunConfig(
        experiment=experiment, params=params, grid=grid, integrator=integrator, initial=initial,
        groundstate=groundstate, classifier=classifier, virial=virial, lorentz=lorentz, scatter=scatter,
        sweep=sweep, diagnostics=diagnostics, out_dir=str(out_dir), seed=int(seed), parallel=int(parallel),
        log_level=env["log_level"], source=source, raw=raw,
    )


def load_config(path: str, overrides: Optional[dict] = None) -> RunConfig:
    if not os.path.exists(path):
        raise FileNotFoundError(f"Config file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    try:
        raw = yaml.safe_load(text) or {}
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigParseError(f"invalid YAML in {path}: {getattr(e, 'problem', e)}", line=line) from e
    return parse_config(raw, _line_index(text), source=path, overrides=overrides)
