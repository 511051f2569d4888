import logging
import math
from typing import Optional

import numpy as np

from IBNLSLab.core.functionals import evaluate_functionals, weinstein
from IBNLSLab.core.grid import (
    Field, Grid, WeightField, PHYSICAL, check_same_grid, check_weight, dilate, fft, ifft, make_weight,
)
from IBNLSLab.core.params import validate_params
from IBNLSLab.errors import (
    ParameterOutOfRange, NoConvergence, DivergedToZero, NotConverged, WrongGauge, ResolutionLoss,
)
from IBNLSLab.models.params import PhysParams, VARIATIONAL
from IBNLSLab.models.records import GroundState, PohozaevReport, FunctionalSnapshot

logger = logging.getLogger("ibnls.groundstate")

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 5000
LOG_EVERY = 100
SCALING_TOL = 1e-5
IDENTITY_TOL = 1e-6


def gaussian_seed(grid: Grid, width: float = 1.0, amplitude: float = 1.0) -> Field:
    return Field.from_function(
        grid, lambda *xs: amplitude * np.exp(-sum(x * x for x in xs) / (2.0 * width ** 2))
    )


def _fix_gauge(u: np.ndarray) -> np.ndarray:
    """Rotate so the peak sample is real and positive; drop a negligible imaginary part."""
    peak = u.flat[np.argmax(np.abs(u))]
    u = u * np.exp(-1j * np.angle(peak))
    if np.abs(u.imag).max() <= 1e-12 * np.abs(u).max():
        u = u.real.astype(complex)
    return u


def equation_residual(q: Field, p: PhysParams, w: WeightField) -> float:
    """‖Δ²Q - μΔQ + ωQ - |x|^{-b}|Q|^αQ‖ / ‖|x|^{-b}|Q|^αQ‖."""
    grid = q.grid
    u = q.physical().values
    symbol = grid.ksq ** 2 + p.mu * grid.ksq + p.omega
    nonlin = fft(w.values * np.abs(u) ** p.alpha * u)
    lhs = symbol * fft(u)
    denom = np.linalg.norm(nonlin)
    if denom == 0:
        return float("inf")
    return float(np.linalg.norm(lhs - nonlin) / denom)


def _finish(u: np.ndarray, grid: Grid, p: PhysParams, w: WeightField, iterations: int,
            residual: float, converged: bool) -> GroundState:
    q = Field(grid, _fix_gauge(u), PHYSICAL)
    snap = evaluate_functionals(q, p, w)
    c_opt = weinstein(q, p, w) if p.mu == 0 else None
    return GroundState(
        field=q, params=p, weight=w, omega=p.omega, residual=residual, snapshot=snap,
        m_threshold=snap.action, c_opt=c_opt, iterations=iterations, converged=converged,
    )


def petviashvili_solve(p: PhysParams, grid: Grid, init: Optional[Field] = None, tol: float = DEFAULT_TOL,
                       max_iter: int = DEFAULT_MAX_ITER, weight: Optional[WeightField] = None) -> GroundState:
    """Stabilized fixed-point iteration for Δ²Q - μΔQ + ωQ = |x|^{-b}|Q|^αQ.

    Q_{n+1} = γ_n^s K(|x|^{-b}|Q_n|^αQ_n), K = (|ξ|⁴ + μ|ξ|² + ω)^{-1}, s = (α+1)/α,
    γ_n = ⟨Q_n, K^{-1}Q_n⟩ / ⟨Q_n, nonlinearity⟩ evaluated in Fourier space.
    """
    validate_params(p, VARIATIONAL)
    if p.kappa != 1:
        raise ParameterOutOfRange("ground states exist for the focusing sign kappa = +1 only")
    if p.alpha <= (8.0 - 2.0 * p.b) / p.d:
        raise ParameterOutOfRange(f"alpha > (8-2b)/d = {(8.0 - 2.0 * p.b) / p.d} required, got {p.alpha}")
    if weight is None:
        weight = make_weight(grid, p.b, 0.0 if grid.shift else None)
    if init is None:
        init = gaussian_seed(grid)
    check_same_grid(init.grid, grid)
    check_weight(init, weight, p.b)

    symbol = grid.ksq ** 2 + p.mu * grid.ksq + p.omega
    s_exp = (p.alpha + 1.0) / p.alpha
    u = init.physical().values.astype(complex)
    uhat = fft(u)
    if not np.any(uhat):
        raise DivergedToZero("initial guess is identically zero")

    residual = float("inf")
    for it in range(1, max_iter + 1):
        nhat = fft(weight.values * np.abs(u) ** p.alpha * u)
        num = float(np.sum(symbol * np.abs(uhat) ** 2))
        den = float(np.real(np.vdot(uhat, nhat)))
        if not math.isfinite(den) or den <= 1e-300 * max(num, 1e-300):
            raise DivergedToZero(f"stabilizing ratio collapsed at iteration {it} (⟨Q, N(Q)⟩ = {den:.3e})")
        gamma = num / den
        uhat_new = gamma ** s_exp * nhat / symbol
        norm_new = np.linalg.norm(uhat_new)
        if norm_new == 0 or not math.isfinite(norm_new):
            raise DivergedToZero(f"iterate vanished at iteration {it}")
        change = float(np.linalg.norm(uhat_new - uhat) / norm_new)
        uhat = uhat_new
        u = ifft(uhat)

        if change <= tol:
            nhat = fft(weight.values * np.abs(u) ** p.alpha * u)
            residual = float(np.linalg.norm(symbol * uhat - nhat) / np.linalg.norm(nhat))
            if residual <= tol:
                logger.info(f"✅ Petviashvili converged in {it} iterations (residual {residual:.2e})")
                return _finish(u, grid, p, weight, it, residual, True)
        if it % LOG_EVERY == 0:
            logger.debug(f"iteration {it}: change {change:.3e}, ratio {gamma:.12f}")

    residual = equation_residual(Field(grid, u), p, weight)
    raise NoConvergence(f"Petviashvili did not converge in {max_iter} iterations (residual {residual:.2e})",
                        iterations=max_iter, residual=residual)


def pohozaev_check(gs: GroundState, p: PhysParams) -> PohozaevReport:
    """Pohozaev ratios (μ = 0) and the Nehari/Pohozaev defects of the solved profile."""
    if not gs.converged:
        raise NotConverged("pohozaev_check needs a converged ground state")
    s = gs.snapshot
    a, g, m, pot = s.lap_l2, s.grad_l2, s.mass, s.potential
    scale = 2.0 * a + p.mu * g
    # multiply the equation by Q̄ and integrate
    nehari = (a + p.mu * g + gs.omega * m - pot) / max(pot, 1e-300)
    pohozaev = s.pohozaev / scale if scale > 0 else float("inf")

    ratio1 = ratio2 = None
    if p.mu == 0:
        c = (p.d * p.alpha + 2.0 * p.b)
        ratio1 = a / (c / (4.0 * (p.alpha + 2.0)) * pot)
        ratio2 = a / (c / p.mass_exponent * gs.omega * m)
    return PohozaevReport(ratio1=ratio1, ratio2=ratio2, nehari_defect=nehari, pohozaev_defect=pohozaev)


def closed_form_sharp_constant(s: FunctionalSnapshot, p: PhysParams) -> float:
    """(4(α+2)/(dα+2b)) · (‖ΔQ₁‖ ‖Q₁‖^{σ_c})^{-(dα-8+2b)/4}."""
    sigma_c = (2.0 - p.gamma_c) / p.gamma_c
    log_base = 0.5 * math.log(s.lap_l2) + 0.5 * sigma_c * math.log(s.mass)
    return 4.0 * (p.alpha + 2.0) / (p.d * p.alpha + 2.0 * p.b) * math.exp(-p.dilation_exponent / 4.0 * log_base)


def sharp_constant(gs: GroundState, p: PhysParams, rtol: float = IDENTITY_TOL) -> float:
    """C_opt = W(Q₁), cross-checked against the closed form; a mismatch beyond rtol means Q₁ is under-resolved."""
    if p.mu != 0 or gs.omega != 1.0:
        raise WrongGauge(f"sharp constant needs mu = 0 and omega = 1 (got mu={p.mu}, omega={gs.omega})")
    c_opt = weinstein(gs.field, p, gs.weight)
    closed = closed_form_sharp_constant(gs.snapshot, p)
    mismatch = abs(c_opt / closed - 1.0)
    if mismatch > rtol:
        raise ResolutionLoss(f"W(Q₁) = {c_opt:.12g} differs from the closed form {closed:.12g} by {mismatch:.2e}")
    return c_opt


def threshold_scaling_exponent(p: PhysParams) -> float:
    """m_{0,ω} = ω^e m_{0,1} with e = (8-2b-(d-4)α)/(4α)."""
    return p.mass_exponent / (4.0 * p.alpha)


def rescale_ground_state(q1: GroundState, omega: float, polish: bool = True, tol: float = DEFAULT_TOL,
                         max_iter: int = DEFAULT_MAX_ITER, scaling_tol: float = SCALING_TOL) -> GroundState:
    """Q_ω(x) = ω^{(4-b)/(4α)} Q₁(ω^{1/4}x), optionally polished by Petviashvili at frequency ω."""
    p1 = q1.params
    if p1.mu != 0:
        raise WrongGauge(f"the frequency scaling law holds for mu = 0 only (got mu={p1.mu})")
    if q1.omega != 1.0:
        raise WrongGauge(f"rescaling starts from the omega = 1 ground state (got omega={q1.omega})")
    if not omega > 0:
        raise ParameterOutOfRange(f"omega > 0 required, got {omega}")

    p = p1.with_omega(omega)
    amplitude = omega ** ((4.0 - p.b) / (4.0 * p.alpha))
    try:
        scaled = dilate(q1.field, omega ** 0.25, amplitude)
    except ResolutionLoss as e:
        raise ResolutionLoss(f"Q_ω at omega={omega:g} is not resolvable on this grid: {e}") from e

    if polish:
        gs = petviashvili_solve(p, scaled.grid, scaled, tol=tol, max_iter=max_iter, weight=q1.weight)
    else:
        residual = equation_residual(scaled, p, q1.weight)
        gs = _finish(scaled.values, scaled.grid, p, q1.weight, 0, residual, residual <= tol)

    expected = omega ** threshold_scaling_exponent(p) * q1.m_threshold
    defect = abs(gs.m_threshold / expected - 1.0)
    if defect > scaling_tol:
        logger.warning(f"⚠️ m at omega={omega:g} is {gs.m_threshold:.10g}, scaling law gives {expected:.10g} "
                       f"(relative defect {defect:.2e})")
    else:
        logger.info(f"✅ scaling law holds at omega={omega:g} (relative defect {defect:.2e})")
    return gs


def threshold_quantities(m: float, p: PhysParams) -> dict:
    """M(Q), ‖ΔQ‖² and E₀(Q) of a μ = 0 ground state expressed through its action m."""
    return {
        "mass": p.mass_exponent / (2.0 * p.alpha) * m,
        "lap_l2": (p.d * p.alpha + 2.0 * p.b) / (2.0 * p.alpha) * m,
        "energy": p.dilation_exponent / (4.0 * p.alpha) * m,
    }
