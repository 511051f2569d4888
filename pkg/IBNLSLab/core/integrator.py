import logging
from typing import Optional

import numpy as np

from IBNLSLab.core.functionals import evaluate_functionals
from IBNLSLab.core.grid import (
    Field, WeightField, PHYSICAL, check_same_grid, check_weight, fft, ifft, sobolev_norms, spectral_tail,
)
from IBNLSLab.core.propagator import LinearSymbol
from IBNLSLab.errors import ConfigInvalid
from IBNLSLab.models.params import PhysParams
from IBNLSLab.models.records import (
    IntegratorConfig, TrajectoryRecord, EvolveState,
    COMPLETED, RESOLUTION_LOST, ENERGY_DRIFT, ADAPT_NONE, ADAPT_HALVE,
)

logger = logging.getLogger("ibnls.integrator")

RESOLVED_TAIL = 1e-10


def _nonlinear_phase(u: np.ndarray, dt: float, p: PhysParams, wvals: np.ndarray, modulus=None) -> np.ndarray:
    if modulus is None:
        modulus = np.abs(u)
    return u * np.exp(1j * p.kappa * dt * wvals * modulus ** p.alpha)


def nonlinear_substep(f: Field, dt: float, p: PhysParams, w: WeightField) -> Field:
    """Exact flow of i u_t = -κ|x|^{-b}|u|^α u over dt; |u| is unchanged pointwise."""
    check_weight(f, w, p.b)
    return Field(f.grid, _nonlinear_phase(f.physical().values, dt, p, w.values), PHYSICAL)


def strang_step(f: Field, dt: float, p: PhysParams, w: WeightField, sym: LinearSymbol,
                dealias: bool = False) -> Field:
    """N(dt/2) ∘ L(dt) ∘ N(dt/2)."""
    check_same_grid(f.grid, sym.grid)
    check_weight(f, w, p.b)
    u = _nonlinear_phase(f.physical().values, 0.5 * dt, p, w.values)
    uhat = fft(u) * sym.phase(dt)
    if dealias:
        uhat[f.grid.tail_mask] = 0.0
    u = _nonlinear_phase(ifft(uhat), 0.5 * dt, p, w.values)
    return Field(f.grid, u, PHYSICAL)


def _validate_config(cfg: IntegratorConfig):
    if not cfg.dt > 0:
        raise ConfigInvalid(f"integrator.dt must be positive, got {cfg.dt}")
    if not cfg.t_end > 0:
        raise ConfigInvalid(f"integrator.t_end must be positive, got {cfg.t_end}")
    if int(cfg.snapshot_stride) != cfg.snapshot_stride or cfg.snapshot_stride < 1:
        raise ConfigInvalid(f"integrator.snapshot_stride must be an integer >= 1, got {cfg.snapshot_stride}")
    if cfg.adapt not in (ADAPT_NONE, ADAPT_HALVE):
        raise ConfigInvalid(f"integrator.adapt must be '{ADAPT_NONE}' or '{ADAPT_HALVE}', got '{cfg.adapt}'")
    if cfg.adapt == ADAPT_HALVE and not cfg.drift_threshold > 0:
        raise ConfigInvalid(f"integrator.drift_threshold must be positive, got {cfg.drift_threshold}")


class _Stepper:
    """Fused Strang chunks on raw arrays; tracks the running potential integral."""

    def __init__(self, grid, cfg: IntegratorConfig, p: PhysParams, w: WeightField, sym: LinearSymbol):
        self.grid = grid
        self.cfg = cfg
        self.p = p
        self.wvals = w.values
        self.sym = sym
        self.keep = ~grid.tail_mask if cfg.dealias else None
        self._phases = {}

    def phase(self, dt: float) -> np.ndarray:
        if dt not in self._phases:
            self._phases[dt] = self.sym.phase(dt)
        return self._phases[dt]

    def potential_of(self, modulus: np.ndarray) -> float:
        return self.grid.cell_volume * float(np.sum(self.wvals * modulus ** (self.p.alpha + 2.0)))

    def advance(self, u: np.ndarray, n_sub: int, dt: float, potential_prev: float):
        """Run n_sub fused steps of size dt; returns (u, ∫P increment, P at the end)."""
        nonlinear = self.cfg.nonlinear
        phase = self.phase(dt)
        acc = 0.0
        if nonlinear:
            u = _nonlinear_phase(u, 0.5 * dt, self.p, self.wvals)
        for i in range(n_sub):
            uhat = fft(u) * phase
            if self.keep is not None:
                uhat *= self.keep
            u = ifft(uhat)
            modulus = np.abs(u)
            # N preserves |u|, so P here already equals P at the end of the step
            pot = self.potential_of(modulus)
            acc += 0.5 * dt * (potential_prev + pot)
            potential_prev = pot
            if nonlinear:
                sub = dt if i < n_sub - 1 else 0.5 * dt
                u = _nonlinear_phase(u, sub, self.p, self.wvals, modulus)
        return u, acc, potential_prev


class HalvingPolicy:
    """halve-on-drift bookkeeping: a chunk may be recomputed at dt/2 up to max_halvings times.

    Every accepted chunk puts the next one back on the base step.
    """

    def __init__(self, cfg: IntegratorConfig):
        self.cfg = cfg
        self.level = 0
        self.most = 0

    @property
    def factor(self) -> int:
        return 2 ** self.level

    def retry(self, drift: float) -> bool:
        if self.cfg.adapt != ADAPT_HALVE or drift <= self.cfg.drift_threshold:
            return False
        if self.level >= self.cfg.max_halvings:
            return False
        self.level += 1
        self.most = max(self.most, self.level)
        return True

    def accept(self):
        self.level = 0


def evolve(u0: Field, cfg: IntegratorConfig, p: PhysParams, w: WeightField, sym: LinearSymbol,
           resume_from: Optional[EvolveState] = None) -> TrajectoryRecord:
    """Strang split-step evolution from u0 (or from a saved state) up to cfg.t_end."""
    _validate_config(cfg)
    check_same_grid(u0.grid, sym.grid)
    check_weight(u0, w, p.b)
    grid = u0.grid
    stride = int(cfg.snapshot_stride)
    n_steps = int(round(cfg.t_end / cfg.dt))
    if n_steps < 1:
        raise ConfigInvalid(f"t_end={cfg.t_end} is shorter than one step of dt={cfg.dt}")

    if resume_from is None:
        u = u0.physical().values.astype(complex)
        tail = spectral_tail(u0)
        if tail > RESOLVED_TAIL:
            logger.warning(f"⚠️ initial data spectral tail {tail:.2e} exceeds {RESOLVED_TAIL:.0e}")
        s0 = evaluate_functionals(u0, p, w)
        state = EvolveState(
            field=None, step=0, t=0.0, dt=cfg.dt,
            mass0=s0.mass, energy0=s0.energy, accumulated_potential=0.0,
            mass_drift_max=0.0, energy_drift_max=0.0,
            h2_initial=sobolev_norms(u0)["h2"], potential_last=s0.potential,
        )
    else:
        if resume_from.dt != cfg.dt:
            raise ConfigInvalid(f"resume dt {resume_from.dt} differs from configured dt {cfg.dt}")
        state = resume_from
        u = state.field.physical().values.astype(complex)
        if state.step >= n_steps:
            raise ConfigInvalid(f"checkpoint at t={state.t} already reaches t_end={cfg.t_end}")

    record = TrajectoryRecord()
    stepper = _Stepper(grid, cfg, p, w, sym)
    mass_scale = state.mass0 if state.mass0 > 0 else 1.0
    energy_scale = abs(state.energy0) if state.energy0 != 0 else 1.0

    def take_snapshot(values, mass_max, energy_max):
        f = Field(grid, values.copy(), PHYSICAL)
        snap = evaluate_functionals(f, p, w)
        mass_drift = abs(snap.mass - state.mass0) / mass_scale
        energy_drift = abs(snap.energy - state.energy0) / energy_scale
        return f, snap, mass_drift, energy_drift, max(mass_max, mass_drift), max(energy_max, energy_drift)

    def record_row(f, snap, t, acc, mass_max, energy_max, dt_used):
        record.times.append(t)
        record.step_sizes.append(dt_used)
        record.snapshots.append(snap)
        record.fields.append(f if cfg.keep_fields else None)
        record.mass_drift.append(mass_max)
        record.energy_drift.append(energy_max)
        record.accumulated_potential.append(acc)
        record.h2_norms.append(sobolev_norms(f)["h2"])

    step = state.step
    acc = state.accumulated_potential
    mass_max, energy_max = state.mass_drift_max, state.energy_drift_max
    pot_last = state.potential_last
    f0, snap0, _, _, _, _ = take_snapshot(u, mass_max, energy_max)
    record_row(f0, snap0, step * cfg.dt, acc, mass_max, energy_max, cfg.dt)

    policy = HalvingPolicy(cfg)
    verdict = COMPLETED
    logger.info(f"🚀 Evolving from t={step * cfg.dt:g} to t={n_steps * cfg.dt:g} "
                f"(dt={cfg.dt:g}, {n_steps - step} steps)")

    while step < n_steps:
        chunk = min(stride, n_steps - step)
        factor = policy.factor
        u_new, inc, pot_new = stepper.advance(u, chunk * factor, cfg.dt / factor, pot_last)
        if not np.all(np.isfinite(u_new)):
            verdict = RESOLUTION_LOST
            logger.warning(f"⚠️ non-finite field at t={(step + chunk) * cfg.dt:g}")
            break
        f, snap, _, e_inst, m_new, e_new = take_snapshot(u_new, mass_max, energy_max)

        if policy.retry(e_inst):
            logger.warning(f"⚠️ energy drift {e_inst:.2e} > {cfg.drift_threshold:.0e} at "
                           f"t={(step + chunk) * cfg.dt:g}; retrying chunk with dt/{policy.factor}")
            continue
        if cfg.adapt == ADAPT_HALVE and e_inst > cfg.drift_threshold:
            verdict = ENERGY_DRIFT

        u, step, acc, pot_last = u_new, step + chunk, acc + inc, pot_new
        mass_max, energy_max = m_new, e_new
        record_row(f, snap, step * cfg.dt, acc, mass_max, energy_max, cfg.dt / factor)
        policy.accept()
        logger.debug(f"t={step * cfg.dt:.6g} M={snap.mass:.12g} E={snap.energy:.12g} "
                     f"mass_drift={mass_max:.2e} energy_drift={energy_max:.2e}")

        if verdict == ENERGY_DRIFT:
            logger.warning(f"⚠️ energy drift {e_inst:.2e} persists after {cfg.max_halvings} halvings; stopping")
            break
        tail = spectral_tail(f)
        if tail > cfg.tail_limit:
            verdict = RESOLUTION_LOST
            logger.warning(f"⚠️ spectral tail {tail:.2e} > {cfg.tail_limit:.0e} at t={step * cfg.dt:g}; "
                           f"resolution lost")
            break

    record.verdict = verdict
    record.halvings = policy.most
    record.final_state = EvolveState(
        field=Field(grid, u.copy(), PHYSICAL), step=step, t=step * cfg.dt, dt=cfg.dt,
        mass0=state.mass0, energy0=state.energy0, accumulated_potential=acc,
        mass_drift_max=mass_max, energy_drift_max=energy_max,
        h2_initial=state.h2_initial, potential_last=pot_last,
    )
    logger.info(f"✅ Evolution {verdict} at t={step * cfg.dt:g}: mass drift {mass_max:.2e}, "
                f"energy drift {energy_max:.2e}")
    return record
