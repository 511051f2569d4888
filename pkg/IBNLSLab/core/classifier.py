import logging
import math
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from IBNLSLab.core.functionals import evaluate_functionals, coercivity_ratio
from IBNLSLab.core.grid import Field, check_same_grid, check_weight, sobolev_norms
from IBNLSLab.core.groundstate import rescale_ground_state, threshold_quantities, threshold_scaling_exponent
from IBNLSLab.errors import WrongGauge, ZeroField
from IBNLSLab.models.params import PhysParams
from IBNLSLab.models.records import (
    GroundState, FunctionalSnapshot, ThresholdReport, AuditRow, AuditReport, TrajectoryRecord,
)

logger = logging.getLogger("ibnls.classifier")

A_PLUS = "A_plus"
A_MINUS = "A_minus"
ABOVE_THRESHOLD = "above_threshold"
BOUNDARY = "boundary"
B_PLUS = "B_plus"
OUTSIDE = "outside"

TOL_S = 1e-6
TOL_G = 1e-6
TOL_B = 1e-6


def _pohozaev_scale(s: FunctionalSnapshot, p: PhysParams) -> float:
    return 2.0 * s.lap_l2 + p.mu * s.grad_l2 + p.pohozaev_coeff * s.potential


def _a_verdict(s_val: float, g_val: float, m_val: float, scale: float, tol_S: float, tol_G: float) -> str:
    if abs(s_val - m_val) <= tol_S * m_val or abs(g_val) <= tol_G * scale:
        return BOUNDARY
    if s_val >= m_val:
        return ABOVE_THRESHOLD
    return A_PLUS if g_val >= 0 else A_MINUS


def _check_matching(p: PhysParams, gs: GroundState):
    gp = gs.params
    if gp.mu != p.mu or gs.omega != p.omega or gp.b != p.b or gp.alpha != p.alpha or gp.d != p.d:
        raise WrongGauge(
            f"ground state solved at (mu={gp.mu}, omega={gs.omega}, b={gp.b}, alpha={gp.alpha}) "
            f"does not match (mu={p.mu}, omega={p.omega}, b={p.b}, alpha={p.alpha})"
        )


def classify_A(f: Field, p: PhysParams, gs: GroundState, tol_S: float = TOL_S, tol_G: float = TOL_G) -> ThresholdReport:
    """Membership of f in 𝒜⁺/𝒜⁻ at the ground state's (μ, ω), with a boundary band."""
    check_same_grid(f.grid, gs.field.grid)
    _check_matching(p, gs)
    return _report_from_snapshot(evaluate_functionals(f, p, gs.weight), p, gs, tol_S, tol_G)


def _report_from_snapshot(s: FunctionalSnapshot, p: PhysParams, gs: GroundState, tol_S: float,
                          tol_G: float) -> ThresholdReport:
    m_val = gs.m_threshold
    if s.mass == 0:
        verdict = A_PLUS
    else:
        verdict = _a_verdict(s.action, s.pohozaev, m_val, _pohozaev_scale(s, p), tol_S, tol_G)
    return ThresholdReport(S_val=s.action, G_val=s.pohozaev, m_val=m_val, a_verdict=verdict)


def _require_q1(p: PhysParams, gs_q1: GroundState):
    if p.mu != 0:
        raise WrongGauge(f"the mass-energy threshold exists for mu = 0 only (got mu={p.mu})")
    if gs_q1.omega != 1.0 or gs_q1.params.mu != 0:
        raise WrongGauge(f"a mu = 0, omega = 1 ground state is required (got omega={gs_q1.omega})")


def _b_margins(s: FunctionalSnapshot, p: PhysParams, q: FunctionalSnapshot):
    """Relative margins 1 - lhs/rhs of the two ℬ⁺ inequalities; positive means strictly inside."""
    sigma_c = (2.0 - p.gamma_c) / p.gamma_c
    e_f = s.lap_l2 / 2.0 - p.kappa * s.potential / (p.alpha + 2.0)
    e_q = q.lap_l2 / 2.0 - q.potential / (p.alpha + 2.0)
    if e_f <= 0:
        energy_margin = 1.0
    else:
        log_ratio = (math.log(e_f) + sigma_c * math.log(s.mass)) - (math.log(e_q) + sigma_c * math.log(q.mass))
        energy_margin = -math.expm1(log_ratio)
    if s.mass == 0 or s.lap_l2 == 0:
        gradient_margin = 1.0
    else:
        log_ratio = 0.5 * (math.log(s.lap_l2) - math.log(q.lap_l2)) + 0.5 * sigma_c * (math.log(s.mass) - math.log(q.mass))
        gradient_margin = -math.expm1(log_ratio)
    return energy_margin, gradient_margin


def _b_verdict(energy_margin: float, gradient_margin: float, tol: float) -> str:
    if abs(energy_margin) <= tol or abs(gradient_margin) <= tol:
        return BOUNDARY
    return B_PLUS if energy_margin > 0 and gradient_margin > 0 else OUTSIDE


def classify_B(f: Field, p: PhysParams, gs_q1: GroundState, tol: float = TOL_B) -> str:
    """ℬ⁺ membership through the mass-energy and gradient-mass products of Q₁."""
    _require_q1(p, gs_q1)
    check_same_grid(f.grid, gs_q1.field.grid)
    s = evaluate_functionals(f, p, gs_q1.weight)
    energy_margin, gradient_margin = _b_margins(s, p, gs_q1.snapshot)
    return _b_verdict(energy_margin, gradient_margin, tol)


def omega_function(omega, mass: float, energy0: float, m1: float, p: PhysParams):
    """F(ω) = ω^e m_{0,1} - (ω/2)M(f) - E₀(f)."""
    omega = np.asarray(omega, dtype=float)
    return omega ** threshold_scaling_exponent(p) * m1 - 0.5 * omega * mass - energy0


def _omega0(mass: float, energy0: float, m1: float, p: PhysParams):
    log_base = math.log(p.mass_exponent / (2.0 * p.alpha) * m1) - math.log(mass)
    log_omega0 = 4.0 * p.alpha / p.dilation_exponent * log_base
    try:
        omega0 = math.exp(log_omega0)
    except OverflowError:
        logger.warning(f"⚠️ ω₀ overflows (log ω₀ = {log_omega0:.3g})")
        return float("inf"), float("inf")
    f_omega0 = omega0 * mass * p.dilation_exponent / (2.0 * p.mass_exponent) - energy0
    return omega0, f_omega0


def omega_star(f: Field, gs_q1: GroundState, p: Optional[PhysParams] = None) -> dict:
    """Maximizer ω₀ of F and the value F(ω₀); F(ω₀) > 0 iff f lies under some threshold m_{0,ω}."""
    p = p or gs_q1.params
    _require_q1(p, gs_q1)
    check_same_grid(f.grid, gs_q1.field.grid)
    s = evaluate_functionals(f, p, gs_q1.weight)
    if s.mass == 0:
        raise ZeroField("omega_star needs f != 0")
    omega0, f_omega0 = _omega0(s.mass, s.energy, gs_q1.m_threshold, p)
    return {"omega0": omega0, "F_omega0": f_omega0, "positive": f_omega0 > 0}


def omega_scan(f: Field, gs_q1: GroundState, omegas: Sequence[float], p: Optional[PhysParams] = None) -> pd.DataFrame:
    p = p or gs_q1.params
    _require_q1(p, gs_q1)
    s = evaluate_functionals(f, p, gs_q1.weight)
    values = omega_function(np.asarray(omegas, dtype=float), s.mass, s.energy, gs_q1.m_threshold, p)
    return pd.DataFrame({"omega": list(omegas), "F": values})


def threshold_band(gs_q1: GroundState, p: PhysParams, tol: float) -> float:
    """tol widened by how far the discrete Q₁ misses its own closed-form Pohozaev relations."""
    closed = threshold_quantities(gs_q1.m_threshold, p)
    q = gs_q1.snapshot
    discrepancy = max(
        abs(q.mass / closed["mass"] - 1.0),
        abs(q.lap_l2 / closed["lap_l2"] - 1.0),
        abs(q.energy / closed["energy"] - 1.0),
    )
    return max(tol, 2.0 * discrepancy)


def _headroom(p: PhysParams) -> float:
    """F(ω₀) never exceeds this fraction of m_{0,ω₀}; bands on F are measured against it."""
    return 1.0 - threshold_scaling_exponent(p)


def _union_verdict(s: FunctionalSnapshot, p: PhysParams, omega0: float, f_omega0: float, m1: float, band: float):
    m_omega0 = omega0 ** threshold_scaling_exponent(p) * m1 if math.isfinite(omega0) else float("inf")
    scale = _pohozaev_scale(s, p)
    near_threshold = math.isfinite(m_omega0) and abs(f_omega0) <= band * _headroom(p) * m_omega0
    if near_threshold or abs(s.pohozaev) <= band * scale:
        return BOUNDARY
    return A_PLUS if f_omega0 > 0 and s.pohozaev >= 0 else OUTSIDE


def equivalence_audit(samples: Sequence[Field], p: PhysParams, gs_q1: GroundState, tol: float = TOL_B,
                      direct_rescale: bool = False) -> AuditReport:
    """Compare ℬ⁺ with ⋃_ω 𝒜⁺_{0,ω} on each sample; the union is realized at the maximizer ω₀.

    With direct_rescale the 𝒜⁺ test at ω₀ goes through classify_A on the rescaled ground state Q_{ω₀}
    instead of the closed-form threshold ω₀^e m_{0,1}.
    """
    _require_q1(p, gs_q1)
    band = threshold_band(gs_q1, p, tol)
    if band > tol:
        logger.info(f"boundary band widened to {band:.2e} by the discrete Pohozaev defect of Q₁")
    rows: List[AuditRow] = []
    for i, f in enumerate(samples):
        check_same_grid(f.grid, gs_q1.field.grid)
        check_weight(f, gs_q1.weight, p.b)
        s = evaluate_functionals(f, p, gs_q1.weight)
        if s.mass == 0:
            raise ZeroField(f"audit sample {i} is identically zero")
        energy_margin, gradient_margin = _b_margins(s, p, gs_q1.snapshot)
        b_verdict = _b_verdict(energy_margin, gradient_margin, band)
        omega0, f_omega0 = _omega0(s.mass, s.energy, gs_q1.m_threshold, p)

        if direct_rescale and math.isfinite(omega0):
            gs_w = rescale_ground_state(gs_q1, omega0, polish=False)
            report = classify_A(f, p.with_omega(omega0), gs_w, tol_S=band * _headroom(p), tol_G=band)
            union = {A_PLUS: A_PLUS, BOUNDARY: BOUNDARY}.get(report.a_verdict, OUTSIDE)
        else:
            union = _union_verdict(s, p, omega0, f_omega0, gs_q1.m_threshold, band)

        pohozaev_margin = s.pohozaev / _pohozaev_scale(s, p)
        in_band = (BOUNDARY in (b_verdict, union)
                   or min(abs(energy_margin), abs(gradient_margin), abs(pohozaev_margin)) <= band)
        agree = (b_verdict == B_PLUS) == (union == A_PLUS)
        rows.append(AuditRow(
            index=i, b_verdict=b_verdict, union_verdict=union, agree=agree, in_band=in_band,
            energy_margin=energy_margin, gradient_margin=gradient_margin, pohozaev_margin=pohozaev_margin,
            omega0=omega0, F_omega0=f_omega0,
        ))
        if not agree:
            logger.warning(f"⚠️ sample {i}: ℬ⁺ says {b_verdict}, union says {union} (in band: {in_band})")

    fraction = sum(row.agree for row in rows) / len(rows) if rows else 1.0
    logger.info(f"✅ audit of {len(rows)} samples: agreement {fraction:.1%}")
    return AuditReport(rows=rows, agreement_fraction=fraction, band=band)


def threshold_report(f: Field, p: PhysParams, gs: GroundState, gs_q1: Optional[GroundState] = None,
                     tol_S: float = TOL_S, tol_G: float = TOL_G, tol_B: float = TOL_B) -> ThresholdReport:
    """classify_A plus, at μ = 0, the ℬ⁺ verdict and ω₀ with their agreement."""
    report = classify_A(f, p, gs, tol_S, tol_G)
    if p.mu != 0 or gs_q1 is None:
        return report
    report.b_verdict = classify_B(f, p.with_omega(1.0), gs_q1, tol_B)
    if evaluate_functionals(f, p, gs.weight).mass > 0:
        star = omega_star(f, gs_q1, p.with_omega(1.0))
        report.omega0, report.F_omega0 = star["omega0"], star["F_omega0"]
        union_inside = star["positive"] and report.G_val >= 0
        report.agreement = union_inside == (report.b_verdict == B_PLUS)
    else:
        report.agreement = report.b_verdict == B_PLUS
    return report


def h2_bound(action: float, p: PhysParams) -> float:
    """Bound on ‖u‖_{H²} for data in 𝒜⁺ with S_{μ,ω}(u) = action.

    On G ≥ 0 the action controls (dα+2b-8)/(2(dα+2b))‖Δu‖² and (ω/2)‖u‖², and
    ‖(1+|ξ|²)û‖² ≤ (‖u‖ + ‖Δu‖)².
    """
    s = p.d * p.alpha + 2.0 * p.b
    if s <= 8.0:
        return float("inf")
    lap_max = 2.0 * s / (s - 8.0) * action
    mass_max = 2.0 * action / p.omega
    return math.sqrt(mass_max) + math.sqrt(lap_max)


def flow_invariance_check(traj: TrajectoryRecord, p: PhysParams, gs: GroundState, slack: float = 0.05,
                          tol_S: float = TOL_S, tol_G: float = TOL_G) -> pd.DataFrame:
    """𝒜 verdict, coercivity ratio G/P and H² bound at every snapshot that kept its field."""
    _check_matching(p, gs)
    rows = []
    bound = None
    for t, f in traj.field_series():
        check_same_grid(f.grid, gs.field.grid)
        s = evaluate_functionals(f, p, gs.weight)
        report = _report_from_snapshot(s, p, gs, tol_S, tol_G)
        if bound is None:
            bound = h2_bound(report.S_val, p) * (1.0 + slack)
        h2 = sobolev_norms(f)["h2"]
        rows.append({"t": t, "S": report.S_val, "G": report.G_val, "coercivity": coercivity_ratio(s),
                     "verdict": report.a_verdict, "h2": h2, "h2_bound": bound, "within_bound": h2 <= bound})
    columns = ["t", "S", "G", "coercivity", "verdict", "h2", "h2_bound", "within_bound"]
    return pd.DataFrame(rows, columns=columns)
