import copy
import hashlib
import itertools
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import fields
from typing import Optional

import numpy as np
import pandas as pd
import yaml

from IBNLSLab import __version__
from IBNLSLab.config import RunConfig, parse_config
from IBNLSLab.core.classifier import (
    A_PLUS, threshold_report, equivalence_audit, flow_invariance_check,
)
from IBNLSLab.core.functionals import find_lambda0
from IBNLSLab.core.grid import Field, Grid, make_grid, make_weight
from IBNLSLab.core.groundstate import (
    gaussian_seed, petviashvili_solve, pohozaev_check, sharp_constant, rescale_ground_state,
    threshold_quantities, threshold_scaling_exponent,
)
from IBNLSLab.core.initial_data import ring_data, random_smooth_field, load_field
from IBNLSLab.core.integrator import evolve
from IBNLSLab.core.lorentz import lorentz_norm, lorentz_norm_star
from IBNLSLab.core.params import validate_params, critical_exponents
from IBNLSLab.core.propagator import make_symbol
from IBNLSLab.core.scattering import scatter_verdict, decay_probe
from IBNLSLab.core.virial import (
    build_cutoff_profile, make_smooth_cutoff, virial_rate_check, cutoff_identity_check, spacetime_growth_fit,
)
from IBNLSLab.data.csv_exporter import CSVExporter
from IBNLSLab.data.snapshot_io import SnapshotStore, save_checkpoint, load_checkpoint
from IBNLSLab.errors import (
    IBNLSError, ConfigInvalid, WrongGauge, EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_RESOLUTION,
)
from IBNLSLab.models.params import PhysParams, VARIATIONAL, EVOLUTION
from IBNLSLab.models.records import COMPLETED, EvolveState, GroundState, TrajectoryRecord
from IBNLSLab.utils.logger import attach_run_log, detach_run_log

MANIFEST = "manifest.json"
SUMMARY = "summary.json"
RUN_LOG = "run.log"
IDENTITY_TOL = 1e-8
LEBESGUE_TOL = 1e-10


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _scalars(payload: dict) -> dict:
    """Keep the JSON-friendly scalar entries of a result dict."""
    return {k: v for k, v in payload.items() if isinstance(v, (int, float, str, bool)) or v is None}


class ExperimentRunner:
    def __init__(self, config: RunConfig, out_dir: Optional[str] = None):
        self.config = config
        self.out_dir = out_dir or config.out_dir
        self.logger = logging.getLogger("ibnls.runner")
        self.results = {}
        self.headline = {}
        self.error = None
        self._ground_states = {}

    # ================================
    # Entry points
    # ================================

    def run(self, checkpoint: Optional[str] = None) -> int:
        """Run the configured experiment; returns the process exit code."""
        os.makedirs(self.out_dir, exist_ok=True)
        handler = attach_run_log(os.path.join(self.out_dir, RUN_LOG),
                                 getattr(logging, self.config.log_level, logging.INFO))
        experiment = "resume" if checkpoint else self.config.experiment
        self.logger.info(f"🚀 Starting {experiment} run → {self.out_dir} (seed {self.config.seed})")
        code = EXIT_NUMERICAL
        try:
            self._write_config()
            if checkpoint:
                code = self.run_evolve(checkpoint)
            else:
                code = self._dispatch()
        except IBNLSError as e:
            code = e.exit_code
            self._record_error(e)
        except (FileNotFoundError, ValueError) as e:
            code = EXIT_CONFIG
            self._record_error(e)
        finally:
            self._write_summary(experiment, code)
            if code == EXIT_OK:
                self.logger.info(f"✅ {experiment} run completed")
            else:
                self.logger.error(f"❌ {experiment} run finished with exit code {code}")
            detach_run_log(handler)
            self._write_manifest()
        return code

    def _dispatch(self) -> int:
        handlers = {
            "groundstate": self.run_groundstate,
            "evolve": self.run_evolve,
            "classify": self.run_classify,
            "audit": self.run_audit,
            "virial-check": self.run_virial_check,
            "lorentz-check": self.run_lorentz_check,
            "sweep": self.run_sweep,
        }
        return handlers[self.config.experiment]()

    def _record_error(self, e: Exception):
        self.error = {"type": type(e).__name__, "message": str(e)}
        self.logger.error(f"❌ {type(e).__name__}: {e}")

    # ================================
    # Artifacts
    # ================================

    def _path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def _write_csv(self, dataframe: pd.DataFrame, name: str, schema: str):
        CSVExporter.export(dataframe, self._path(name), schema)
        self.logger.info(f"📨 {name} written ({len(dataframe)} rows)")

    def _write_json(self, payload: dict, name: str):
        with open(self._path(name), "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2, sort_keys=True, default=float)

    def _write_config(self):
        with open(self._path("config.yaml"), "w", encoding="utf-8") as f:
            yaml.safe_dump(self.config.raw, f, sort_keys=True)

    def _write_summary(self, experiment: str, code: int):
        self._write_json({
            "version": __version__,
            "experiment": experiment,
            "seed": self.config.seed,
            "exit_code": code,
            "error": self.error,
            "config_hash_section": self.config.hash_section(),
            "results": self.results,
        }, SUMMARY)

    def _write_manifest(self):
        entries = []
        for root, _, files in os.walk(self.out_dir):
            for name in files:
                path = os.path.join(root, name)
                rel = os.path.relpath(path, self.out_dir).replace(os.sep, "/")
                if rel == MANIFEST:
                    continue
                entries.append({"path": rel, "bytes": os.path.getsize(path), "sha256": _sha256(path)})
        entries.sort(key=lambda e: e["path"])
        entries.append({"path": MANIFEST, "bytes": None, "sha256": None})
        with open(self._path(MANIFEST), "w", encoding="utf-8") as f:
            json.dump({"version": __version__, "files": entries}, f, indent=2, sort_keys=True)
        self.logger.info(f"📨 manifest lists {len(entries)} files")

    # ================================
    # Shared setup
    # ================================

    def _grid(self) -> Grid:
        g = self.config.grid
        return make_grid(self.config.params.d, g["n_points"], g["half_width"], g["shift"])

    def _weight(self, grid: Grid):
        eps_reg = self.config.grid["eps_reg"]
        if eps_reg is None and grid.shift:
            eps_reg = 0.0
        return make_weight(grid, self.config.params.b, eps_reg, self.config.grid["origin_correction"])

    def _ground_state(self, p: PhysParams, grid: Grid, w) -> GroundState:
        if p not in self._ground_states:
            gs_cfg = self.config.groundstate
            self.logger.info(f"Solving for the ground state at omega={p.omega:g}")
            self._ground_states[p] = petviashvili_solve(
                p, grid, gaussian_seed(grid, gs_cfg["seed_width"]),
                tol=gs_cfg["tol"], max_iter=gs_cfg["max_iter"], weight=w,
            )
        return self._ground_states[p]

    def _initial(self, grid: Grid, w, p: PhysParams) -> Field:
        init = self.config.initial
        family = init["family"]
        if family == "gaussian":
            f = gaussian_seed(grid, init["width"], init["amplitude"])
        elif family == "ring":
            f = ring_data(grid, init["amplitude"], init["width"], init["radius"])
        elif family == "scaled-ground-state":
            f = self._ground_state(p, grid, w).field.scaled(init["scale"])
        elif family == "from-file":
            f = load_field(init["path"], grid)
        else:
            rng = np.random.default_rng(self.config.seed)
            f = random_smooth_field(grid, rng, init["modes"], init["width"], init["amplitude"])
        self.logger.info(f"Initial data: {family} (mass {f.mass():.6g})")
        return f

    # ================================
    # groundstate
    # ================================

    def run_groundstate(self) -> int:
        p = self.config.params
        regime = validate_params(p, VARIATIONAL)
        grid = self._grid()
        w = self._weight(grid)
        gs = self._ground_state(p, grid, w)
        report = pohozaev_check(gs, p)
        lambda0 = find_lambda0(gs.field, p, w)
        SnapshotStore(self.out_dir).save(gs.field, "ground_state.bin")

        results = {
            "ground_state": gs.summary(),
            "pohozaev": report.to_dict(),
            "lambda0": lambda0,
            "regime": regime.to_dict(),
        }
        if p.mu == 0 and p.omega == 1.0:
            results["sharp_constant"] = sharp_constant(gs, p, self.config.groundstate["identity_tol"])
            closed = threshold_quantities(gs.m_threshold, p)
            results["closed_form"] = {
                name: {"closed_form": value, "discrete": getattr(gs.snapshot, name)}
                for name, value in closed.items()
            }
        omegas = self.config.groundstate["rescale_omegas"]
        if omegas:
            results["scaling"] = self._scaling_table(gs, grid, w, omegas)

        self.results = results
        self.headline = {
            "m_threshold": gs.m_threshold,
            "residual": gs.residual,
            "iterations": gs.iterations,
            "ratio1": report.ratio1,
            "ratio2": report.ratio2,
            "lambda0": lambda0,
            "c_opt": gs.c_opt,
        }
        self.logger.info(f"✅ m = {gs.m_threshold:.12g}, residual {gs.residual:.2e}, λ₀ = {lambda0:.10f}")
        return EXIT_OK

    def _scaling_table(self, gs: GroundState, grid: Grid, w, omegas) -> dict:
        p = self.config.params
        if p.mu != 0:
            raise WrongGauge(f"ground-state rescaling holds for mu = 0 only (got mu={p.mu})")
        q1 = gs if gs.omega == 1.0 else self._ground_state(p.with_omega(1.0), grid, w)
        exponent = threshold_scaling_exponent(p)
        rows = []
        for omega in omegas:
            gs_w = rescale_ground_state(q1, omega, tol=self.config.groundstate["tol"],
                                        max_iter=self.config.groundstate["max_iter"])
            expected = omega ** exponent * q1.m_threshold
            rows.append({
                "omega": omega,
                "m": gs_w.m_threshold,
                "m_scaling_law": expected,
                "rel_defect": abs(gs_w.m_threshold / expected - 1.0),
                "residual": gs_w.residual,
            })
        df = pd.DataFrame(rows)
        self._write_csv(df, "scaling.csv", "scaling")
        return {"exponent": exponent, "max_rel_defect": float(df["rel_defect"].max())}

    # ================================
    # evolve / resume
    # ================================

    def run_evolve(self, checkpoint: Optional[str] = None) -> int:
        p = self.config.params
        cfg = self.config.integrator
        if cfg is None:
            raise ConfigInvalid("the integrator section with dt and t_end is required")
        validate_params(p, EVOLUTION)
        grid = self._grid()
        w = self._weight(grid)
        sym = make_symbol(grid, p.mu)

        state = None
        if checkpoint:
            field, sidecar = load_checkpoint(checkpoint, self.config.hash_section())
            state = EvolveState(field=field, **{
                f.name: sidecar[f.name] for f in fields(EvolveState) if f.name != "field"
            })
            u0 = field
            self.logger.info(f"Resuming from {checkpoint} at t={state.t:g} (step {state.step})")
        else:
            u0 = self._initial(grid, w, p)

        traj = evolve(u0, cfg, p, w, sym, resume_from=state)
        return self._report_trajectory(traj, p, grid, w, sym)

    def _report_trajectory(self, traj: TrajectoryRecord, p: PhysParams, grid: Grid, w, sym) -> int:
        self._write_csv(traj.to_dataframe(), "trajectory.csv", "trajectory")
        bin_path, json_path = save_checkpoint(self.out_dir, traj.final_state, self.config.hash_section())
        self.logger.info(f"📨 checkpoint written at t={traj.final_state.t:g}")

        final = traj.final_state
        self.results = {
            "verdict": traj.verdict,
            "t_final": final.t,
            "steps": final.step,
            "halvings": traj.halvings,
            "mass_drift_max": final.mass_drift_max,
            "energy_drift_max": final.energy_drift_max,
            "accumulated_potential": final.accumulated_potential,
            "checkpoint": os.path.basename(bin_path),
            "diagnostics": {},
        }
        self.headline = _scalars(self.results)
        code = EXIT_OK if traj.verdict == COMPLETED else EXIT_RESOLUTION

        handlers = {
            "scatter": self._scatter_diagnostic,
            "growth": self._growth_diagnostic,
            "flow-invariance": self._flow_diagnostic,
            "decay": self._decay_diagnostic,
        }
        for name in self.config.diagnostics:
            try:
                result, diag_code = handlers[name](traj, p, grid, w, sym)
            except IBNLSError as e:
                self.logger.error(f"❌ {name} diagnostic failed: {e}")
                result, diag_code = {"error": str(e), "type": type(e).__name__}, e.exit_code
            self.results["diagnostics"][name] = result
            code = max(code, diag_code)
        return code

    def _exponents(self, p: PhysParams):
        return critical_exponents(p, radial=self.config.virial["radial"])

    def _scatter_diagnostic(self, traj, p, grid, w, sym):
        opts = {k: self.config.scatter[k] for k in (
            "min_horizon", "min_snapshots", "cauchy_window", "potential_ratio",
            "lk_windows", "lk_ratio", "growth_factor", "cauchy_floor",
        )}
        verdict = scatter_verdict(traj, p, self._exponents(p), sym, w, **opts)
        times = [t for t, _ in traj.field_series()]
        self._write_csv(verdict.to_dataframe(times), "scatter.csv", "scatter")
        if verdict.u_plus is not None:
            SnapshotStore(self.out_dir).save(verdict.u_plus, "u_plus.bin")
        self.headline["scatter_status"] = verdict.status
        return verdict.summary(), EXIT_OK

    def _growth_diagnostic(self, traj, p, grid, w, sym):
        fit = spacetime_growth_fit(traj, self._exponents(p), n_dyadic=self.config.virial["growth_dyadic"],
                                   slack=self.config.virial["growth_slack"])
        self._write_csv(fit.pop("table"), "growth.csv", "growth")
        self.headline["growth_exponent"] = fit["exponent"]
        return fit, EXIT_OK if fit["pass"] else EXIT_RESOLUTION

    def _flow_diagnostic(self, traj, p, grid, w, sym):
        if not traj.field_series():
            return {"skipped": True, "reason": "no field snapshots kept"}, EXIT_OK
        gs = self._ground_state(p, grid, w)
        df = flow_invariance_check(traj, p, gs, tol_S=self.config.classifier["tol_S"],
                                   tol_G=self.config.classifier["tol_G"])
        self._write_csv(df, "flow_invariance.csv", "flow-invariance")
        started_inside = df["verdict"].iloc[0] == A_PLUS
        stayed = bool((df["verdict"] == A_PLUS).all())
        bounded = bool(df["within_bound"].all())
        passed = (not started_inside) or (stayed and bounded)
        if not passed:
            self.logger.warning("⚠️ data starting in A_plus left it or exceeded the H² bound")
        return {
            "initial_verdict": df["verdict"].iloc[0],
            "stayed_a_plus": stayed,
            "within_bound": bounded,
            "h2_bound": float(df["h2_bound"].iloc[0]),
            "h2_max": float(df["h2"].max()),
            "min_coercivity": float(df["coercivity"].min()),
            "passed": passed,
        }, EXIT_OK if passed else EXIT_RESOLUTION

    def _decay_diagnostic(self, traj, p, grid, w, sym):
        probe = decay_probe(traj)
        self.headline["p_decay_exponent"] = probe["p_decay_exponent"]
        return probe, EXIT_OK

    # ================================
    # classify / audit
    # ================================

    def run_classify(self) -> int:
        p = self.config.params
        validate_params(p, VARIATIONAL)
        grid = self._grid()
        w = self._weight(grid)
        gs = self._ground_state(p, grid, w)
        gs_q1 = self._ground_state(p.with_omega(1.0), grid, w) if p.mu == 0 else None
        if self.config.initial["family"] == "scaled-ground-state":
            base = gs.field
        else:
            base = self._initial(grid, w, p)

        opts = self.config.classifier
        rows = []
        for c in opts["scales"]:
            report = threshold_report(base.scaled(c), p, gs, gs_q1, opts["tol_S"], opts["tol_G"], opts["tol_B"])
            rows.append({"c": c, **report.to_dict()})
        df = pd.DataFrame(rows).sort_values("c", kind="stable").reset_index(drop=True)
        self._write_csv(df, "classify.csv", "classify")

        leaving = df[df["a_verdict"] != A_PLUS]
        transition = float(leaving["c"].iloc[0]) if len(leaving) else None
        disagreements = sum(1 for row in rows if row["agreement"] is False)
        self.results = {"m_threshold": gs.m_threshold, "first_c_outside_a_plus": transition,
                        "disagreements": disagreements, "n_samples": len(df)}
        self.headline = dict(self.results)
        self.logger.info(f"✅ classified {len(df)} samples; A_plus ends at c = {transition}")
        return EXIT_OK

    def run_audit(self) -> int:
        p = self.config.params
        if p.mu != 0:
            raise WrongGauge(f"the threshold audit needs mu = 0 (got mu={p.mu})")
        p1 = p.with_omega(1.0)
        validate_params(p1, VARIATIONAL)
        grid = self._grid()
        w = self._weight(grid)
        q1 = self._ground_state(p1, grid, w)

        opts = self.config.classifier
        init = self.config.initial
        samples = [q1.field.scaled(c) for c in opts["scales"]]
        kinds = [f"scaled-ground-state c={c:g}" for c in opts["scales"]]
        rng = np.random.default_rng(self.config.seed)
        peak = float(np.abs(q1.field.values).max())
        for i in range(opts["n_random"]):
            amplitude = peak * rng.uniform(0.2, 1.5)
            samples.append(random_smooth_field(grid, rng, init["modes"], init["width"], amplitude))
            kinds.append(f"random #{i}")
        if not samples:
            raise ConfigInvalid("the audit has no samples: set classifier.scales or classifier.n_random")

        report = equivalence_audit(samples, p1, q1, opts["tol_B"], opts["direct_rescale"])
        df = report.to_dataframe()
        df.insert(1, "sample", kinds)
        self._write_csv(df, "audit.csv", "audit")

        outside = [row for row in report.disagreements if not row.in_band]
        self.results = {
            "n_samples": len(samples),
            "agreement_fraction": report.agreement_fraction,
            "band": report.band,
            "disagreements": len(report.disagreements),
            "disagreements_outside_band": len(outside),
            "m_threshold": q1.m_threshold,
        }
        self.headline = dict(self.results)
        if outside:
            self.logger.error(f"❌ {len(outside)} audit disagreements lie outside the boundary band")
            return EXIT_RESOLUTION
        return EXIT_OK

    # ================================
    # virial-check / lorentz-check
    # ================================

    def run_virial_check(self) -> int:
        p = self.config.params
        cfg = self.config.integrator
        if cfg is None or not cfg.keep_fields:
            raise ConfigInvalid("virial-check needs an integrator section with keep_fields: true")
        validate_params(p, EVOLUTION)
        grid = self._grid()
        w = self._weight(grid)
        sym = make_symbol(grid, p.mu)
        opts = self.config.virial

        prof = build_cutoff_profile(grid, opts["R"])
        u0 = self._initial(grid, w, p)
        identity = cutoff_identity_check(u0, make_smooth_cutoff(grid, opts["R"]))
        traj = evolve(u0, cfg, p, w, sym)
        report = virial_rate_check(traj, prof, p, w, rtol=opts["rtol"], support_tol=opts["support_tol"])
        if report["table"] is not None:
            self._write_csv(report["table"], "virial.csv", "virial")

        identity_ok = (not identity["resolved"]) or (
            identity["err1"] <= IDENTITY_TOL and identity["err2"] <= IDENTITY_TOL)
        self.results = {
            "profile_checks": prof.checks,
            "cutoff_identities": identity,
            "identities_ok": identity_ok,
            "evolve_verdict": traj.verdict,
            **{k: v for k, v in report.items() if k != "table"},
        }
        self.headline = _scalars(self.results)
        if traj.verdict != COMPLETED or report["passed"] is False or not identity_ok:
            return EXIT_RESOLUTION
        return EXIT_OK

    def run_lorentz_check(self) -> int:
        p = self.config.params
        opts = self.config.lorentz
        d, b = p.d, p.b
        if not 0 < b < d:
            raise ConfigInvalid(f"the weight calibration needs 0 < b < d (got b={b}, d={d})")
        r_weight = d / b
        exact = (math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0)) ** (b / d)
        r = opts["r"] or p.alpha + 2.0
        rho = opts["rho"]

        rows = []
        for n in opts["n_points"]:
            grid = make_grid(d, n, opts["half_width"], shift=True)
            w = make_weight(grid, b, 0.0)
            weight_norm = lorentz_norm(Field(grid, w.samples.astype(complex)), r_weight, float("inf"))
            f = gaussian_seed(grid)
            lebesgue = float((grid.cell_volume * np.sum(np.abs(f.values) ** r)) ** (1.0 / r))
            lrr = lorentz_norm(f, r, r)
            row = {
                "n_points": n,
                "spacing": grid.spacing,
                "weight_norm": weight_norm,
                "exact": exact,
                "rel_error": abs(weight_norm / exact - 1.0),
                "lrr_norm": lrr,
                "lebesgue_norm": lebesgue,
                "lebesgue_defect": abs(lrr / lebesgue - 1.0),
            }
            if rho is not None:
                row["lr_rho"] = lorentz_norm(f, r, rho)
                row["lr_rho_star"] = lorentz_norm_star(f, r, rho)
            rows.append(row)
        df = pd.DataFrame(rows)
        self._write_csv(df, "lorentz.csv", "lorentz")

        errors = df["rel_error"].to_numpy()
        monotone = bool(np.all(np.diff(errors) <= 1e-12))
        converged = bool(errors[-1] <= opts["tol"])
        lebesgue_ok = bool(df["lebesgue_defect"].max() <= LEBESGUE_TOL)
        self.results = {
            "exact": exact,
            "final_rel_error": float(errors[-1]),
            "monotone": monotone,
            "converged": converged,
            "lebesgue_ok": lebesgue_ok,
        }
        self.headline = dict(self.results)
        if not (monotone and converged and lebesgue_ok):
            self.logger.warning("⚠️ Lorentz calibration failed")
            return EXIT_RESOLUTION
        return EXIT_OK

    # ================================
    # sweep
    # ================================

    def run_sweep(self) -> int:
        sweep = self.config.sweep
        axes = sweep["axes"]
        names = list(axes)
        points = [dict(zip(names, values)) for values in itertools.product(*(axes[n] for n in names))]
        if not names or not points:
            raise ConfigInvalid("the sweep grid is empty")

        jobs = []
        for i, point in enumerate(points):
            raw = copy.deepcopy(self.config.raw)
            raw.pop("sweep", None)
            raw["experiment"] = sweep["experiment"]
            raw.setdefault("params", {}).update(point)
            raw["seed"] = self.config.seed + i
            jobs.append((i, raw, point, os.path.join(self.out_dir, f"point_{i:03d}")))

        workers = max(1, self.config.parallel)
        self.logger.info(f"🚀 Sweeping {len(jobs)} points of {sweep['experiment']} with {workers} worker(s)")
        rows = []
        if workers == 1:
            rows = [_run_point(job) for job in jobs]
        else:
            with ProcessPoolExecutor(max_workers=workers) as ex:
                futures = {ex.submit(_run_point, job): job for job in jobs}
                for future in as_completed(futures):
                    job = futures[future]
                    try:
                        rows.append(future.result())
                    except Exception as e:
                        rows.append(_error_row(job, EXIT_NUMERICAL, f"{type(e).__name__}: {e}"))
        rows.sort(key=lambda row: row["index"])

        fixed = ["index", *names, "status", "exit_code", "error"]
        extra = sorted({key for row in rows for key in row} - set(fixed))
        df = pd.DataFrame(rows, columns=fixed + extra)
        self._write_csv(df, "sweep.csv", "sweep")

        failed = df[df["status"] != "ok"]
        for _, row in failed.iterrows():
            self.logger.error(f"❌ sweep point {row['index']} failed: {row['error']}")
        self.results = {"n_points": len(df), "n_failed": len(failed)}
        return int(failed["exit_code"].max()) if len(failed) else EXIT_OK


def _error_row(job, exit_code: int, message: str) -> dict:
    index, _, point, _ = job
    return {"index": index, **point, "status": "failed", "exit_code": exit_code, "error": message}


def _run_point(job) -> dict:
    """One sweep point in its own output directory; errors become a failed row."""
    index, raw, point, out_dir = job
    try:
        config = parse_config(raw, overrides={"out_dir": out_dir})
    except IBNLSError as e:
        return _error_row(job, e.exit_code, str(e))
    runner = ExperimentRunner(config, out_dir)
    code = runner.run()
    row = {"index": index, **point, "status": "ok" if code == EXIT_OK else "failed", "exit_code": code,
           "error": runner.error["message"] if runner.error else ""}
    row.update(runner.headline)
    return row
