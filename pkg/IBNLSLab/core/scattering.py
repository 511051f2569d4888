import logging
from typing import List

import numpy as np
from scipy import stats

from IBNLSLab.core.grid import Field, WeightField, check_weight, sobolev_norms
from IBNLSLab.core.lorentz import lk_lr2_series
from IBNLSLab.core.propagator import LinearSymbol, linear_evolve
from IBNLSLab.errors import NoSnapshots, HorizonTooShort, SpanTooShort
from IBNLSLab.models.params import PhysParams, CriticalExponents
from IBNLSLab.models.records import TrajectoryRecord, ScatterVerdict, RESOLUTION_LOST

logger = logging.getLogger("ibnls.scattering")

SCATTERING = "scattering-indicated"
UNDECIDED = "undecided"
GROWTH = "growth"

MIN_HORIZON = 20.0
MIN_SNAPSHOTS = 20
CAUCHY_WINDOW = 4
POTENTIAL_RATIO = 0.01
LK_WINDOWS = 2
LK_RATIO = 0.5
GROWTH_FACTOR = 3.0
CAUCHY_FLOOR = 1e-10
MIN_PROBE_SPAN = 5.0
UNDECIDED_EXPONENT = 0.05


def duhamel_profile(traj: TrajectoryRecord, sym: LinearSymbol) -> List[Field]:
    """w(t_j) = U_μ(-t_j)u(t_j) for every snapshot that kept its field."""
    series = traj.field_series()
    if not series:
        raise NoSnapshots("duhamel_profile needs field snapshots; run with keep_fields enabled")
    return [linear_evolve(f, -t, sym).physical() for t, f in series]


def _dyadic_increments(times: np.ndarray, cumulative: np.ndarray, n_windows: int) -> List[float]:
    """Increments of a cumulative series over [T/2^{j+1}, T/2^j], newest window first."""
    t_end = times[-1]
    edges = t_end / 2.0 ** np.arange(n_windows + 1)
    values = np.interp(edges, times, cumulative)
    return [float(values[j] - values[j + 1]) for j in range(n_windows)]


def scatter_verdict(traj: TrajectoryRecord, p: PhysParams, ce: CriticalExponents, sym: LinearSymbol,
                    w: WeightField, min_horizon: float = MIN_HORIZON, min_snapshots: int = MIN_SNAPSHOTS,
                    cauchy_window: int = CAUCHY_WINDOW, potential_ratio: float = POTENTIAL_RATIO,
                    lk_windows: int = LK_WINDOWS, lk_ratio: float = LK_RATIO,
                    growth_factor: float = GROWTH_FACTOR, cauchy_floor: float = CAUCHY_FLOOR) -> ScatterVerdict:
    """Numerical scattering indicator on a recorded trajectory; never a certificate."""
    series = traj.field_series()
    horizon = traj.times[-1] if traj.times else 0.0
    if horizon < min_horizon or len(series) < min_snapshots:
        raise HorizonTooShort(
            f"scatter verdict needs t_end >= {min_horizon:g} and {min_snapshots} field snapshots "
            f"(got t_end={horizon:g}, {len(series)} snapshots)"
        )
    check_weight(series[0][1], w, p.b)
    kept = [i for i, f in enumerate(traj.fields) if f is not None]
    times = np.array([traj.times[i] for i in kept])
    potentials = [traj.snapshots[i].potential for i in kept]

    profiles = duhamel_profile(traj, sym)
    cauchy = [sobolev_norms(Field(b.grid, b.values - a.values))["h2"] for a, b in zip(profiles, profiles[1:])]
    lk_running = lk_lr2_series(series, ce.k, ce.r)
    w_norm = sobolev_norms(profiles[-1])["h2"]

    reasons = []
    h2_initial = traj.final_state.h2_initial if traj.final_state is not None else traj.h2_norms[0]
    h2_max = max(traj.h2_norms) if traj.h2_norms else 0.0
    growth = traj.verdict == RESOLUTION_LOST or (h2_initial > 0 and h2_max > growth_factor * h2_initial)
    if traj.verdict == RESOLUTION_LOST:
        reasons.append("resolution lost during the run")
    if h2_initial > 0 and h2_max > growth_factor * h2_initial:
        reasons.append(f"‖u‖_H² reached {h2_max / h2_initial:.3g}× its initial value")

    tail = cauchy[-cauchy_window:]
    floor = cauchy_floor * max(w_norm, 1e-300)
    cauchy_ok = len(tail) == cauchy_window and (
        all(x <= floor for x in tail) or all(b < a for a, b in zip(tail, tail[1:]))
    )
    if not cauchy_ok:
        reasons.append(f"Duhamel increments not decreasing over the last {cauchy_window} windows")

    p0 = potentials[0]
    potential_ok = p0 == 0 or potentials[-1] / p0 <= potential_ratio
    if not potential_ok:
        reasons.append(f"P(u(T))/P(u(0)) = {potentials[-1] / p0:.3g} > {potential_ratio}")

    increments = _dyadic_increments(times, np.asarray(lk_running) ** ce.k, lk_windows + 1)
    lk_ok = all(
        newer <= lk_ratio * older or older <= 0
        for newer, older in zip(increments, increments[1:])
    )
    if not lk_ok:
        reasons.append(f"L^k L^(r,2) increments over dyadic windows do not shrink by {1 / lk_ratio:g}×")

    if growth:
        status = GROWTH
    elif cauchy_ok and potential_ok and lk_ok:
        status = SCATTERING
    else:
        status = UNDECIDED

    verdict = ScatterVerdict(
        status=status,
        cauchy_series=cauchy,
        potential_series=potentials,
        lk_norm_series=lk_running,
        u_plus=profiles[-1] if status == SCATTERING else None,
        tail_error=cauchy[-1] if cauchy else None,
        reasons=reasons,
    )
    logger.info(f"{'✅' if status == SCATTERING else '⚠️'} scatter verdict: {status}"
                + (f" ({'; '.join(reasons)})" if reasons else ""))
    return verdict


def decay_probe(traj: TrajectoryRecord, t_min: float = 1.0, min_span: float = MIN_PROBE_SPAN,
                undecided_below: float = UNDECIDED_EXPONENT) -> dict:
    """Log-log slope of P(u(t)) over t ≥ t_min."""
    times = np.asarray(traj.times, dtype=float)
    pots = np.array([s.potential for s in traj.snapshots])
    use = (times >= t_min) & (pots > 0)
    if use.sum() < 3 or times[use][-1] - times[use][0] < min_span:
        raise SpanTooShort(
            f"decay probe needs 3 snapshots with P > 0 spanning {min_span:g} time units after t={t_min:g}"
        )
    fit = stats.linregress(np.log(times[use]), np.log(pots[use]))
    exponent = float(fit.slope)
    return {
        "p_decay_exponent": exponent,
        "r2": float(fit.rvalue ** 2),
        "undecided": abs(exponent) < undecided_below,
    }
