import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import List

import numpy as np
import pandas as pd
from numpy.polynomial import Polynomial
from numpy.polynomial.legendre import leggauss
from scipy import stats
from scipy.interpolate import CubicHermiteSpline
from scipy.special import comb

from IBNLSLab.core.functionals import pohozaev_weighted
from IBNLSLab.core.grid import (
    Field, Grid, WeightField, PHYSICAL, check_same_grid, check_weight, gradient, hessian, laplacian, spectral_tail,
)
from IBNLSLab.errors import RadiusOutOfRange, InsufficientSnapshots, SpanTooShort
from IBNLSLab.models.params import PhysParams, CriticalExponents
from IBNLSLab.models.records import TrajectoryRecord, COMPLETED

logger = logging.getLogger("ibnls.virial")

JET_ORDER = 6
TABLE_PANELS = 2048
PROFILE_TOL = 1e-8
SUPPORT_TOL = 1e-8
RATE_RTOL = 1e-3
CUTOFF_RESOLVED_TAIL = 1e-10
MIN_GROWTH_SPAN = 10.0
GROWTH_SLACK = 0.1


@lru_cache(maxsize=None)
def _psi_polynomials(order: int) -> tuple:
    """P_n with d^n/dx^n e^{-1/x} = P_n(1/x) e^{-1/x}."""
    polys = [Polynomial([1.0])]
    y2 = Polynomial([0.0, 0.0, 1.0])
    for _ in range(order):
        prev = polys[-1]
        polys.append(y2 * (prev - prev.deriv()))
    return tuple(polys)


def _psi_jet(x: np.ndarray, order: int) -> List[np.ndarray]:
    x = np.asarray(x, dtype=float)
    pos = x > 0
    y = np.zeros_like(x)
    y[pos] = 1.0 / x[pos]
    base = np.where(pos, np.exp(-y), 0.0)
    return [np.where(pos, poly(y) * base, 0.0) for poly in _psi_polynomials(order)]


def zeta_jet(rho, order: int = 4) -> np.ndarray:
    """ζ and its first `order` derivatives; ζ = 2 on [0, 1], 0 on [2, ∞), C^∞ in between."""
    rho = np.asarray(rho, dtype=float)
    shape = rho.shape
    rho = rho.reshape(-1)
    jet = np.zeros((order + 1, rho.size))
    jet[0][rho <= 1.0] = 2.0
    mid = (rho > 1.0) & (rho < 2.0)
    if not np.any(mid):
        return jet.reshape((order + 1,) + shape)
    r = rho[mid]
    a = _psi_jet(2.0 - r, order)
    a = [(-1) ** n * a[n] for n in range(order + 1)]
    b = _psi_jet(r - 1.0, order)
    den = [a[n] + b[n] for n in range(order + 1)]
    # a = q·den, differentiated with Leibniz and solved for q^{(n)}
    q = []
    for n in range(order + 1):
        acc = a[n].copy()
        for k in range(n):
            acc -= comb(n, k, exact=True) * q[k] * den[n - k]
        q.append(acc / den[0])
    for n in range(order + 1):
        jet[n][mid] = 2.0 * q[n]
    return jet.reshape((order + 1,) + shape)


def zeta(rho) -> np.ndarray:
    return zeta_jet(rho, 0)[0]


def smooth_cutoff_profile(rho) -> np.ndarray:
    """χ(ρ) = ζ(2ρ)/2: 1 on ρ ≤ 1/2, 0 on ρ ≥ 1."""
    return 0.5 * zeta(2.0 * np.asarray(rho, dtype=float))


@lru_cache(maxsize=4)
def _moment_tables(n_panels: int = TABLE_PANELS):
    """Hermite interpolants of I0(ρ) = ∫₀^ρ ζ and I1(ρ) = ∫₀^ρ τζ(τ)dτ on [1, 2]."""
    nodes, weights = leggauss(8)
    edges = np.linspace(1.0, 2.0, n_panels + 1)
    lo, hi = edges[:-1, None], edges[1:, None]
    tau = 0.5 * (hi - lo) * nodes[None, :] + 0.5 * (hi + lo)
    z = zeta(tau)
    half = 0.5 * (hi - lo)[:, 0]
    panel0 = half * (z * weights[None, :]).sum(axis=1)
    panel1 = half * (tau * z * weights[None, :]).sum(axis=1)
    i0 = 2.0 + np.concatenate([[0.0], np.cumsum(panel0)])
    i1 = 1.0 + np.concatenate([[0.0], np.cumsum(panel1)])
    z_edges = zeta(edges)
    return CubicHermiteSpline(edges, i0, z_edges), CubicHermiteSpline(edges, i1, edges * z_edges)


def vartheta_jet(rho, order: int = JET_ORDER) -> np.ndarray:
    """ϑ(ρ) = ∫₀^ρ∫₀^s ζ = ρ I0(ρ) - I1(ρ) and its derivatives; ϑ' = I0, ϑ^{(n)} = ζ^{(n-2)}."""
    rho = np.asarray(rho, dtype=float)
    shape = rho.shape
    rho = rho.reshape(-1)
    spline0, spline1 = _moment_tables()
    i0 = np.empty_like(rho)
    i1 = np.empty_like(rho)
    inner, outer = rho <= 1.0, rho >= 2.0
    mid = ~inner & ~outer
    i0[inner], i1[inner] = 2.0 * rho[inner], rho[inner] ** 2
    i0[mid], i1[mid] = spline0(rho[mid]), spline1(rho[mid])
    i0[outer], i1[outer] = float(spline0(2.0)), float(spline1(2.0))
    jet = np.empty((order + 1,) + rho.shape)
    jet[0] = rho * i0 - i1
    jet[0][inner] = rho[inner] ** 2
    jet[1] = i0
    if order >= 2:
        jet[2:] = zeta_jet(rho, order - 2)
    return jet.reshape((order + 1,) + shape)


def vartheta(rho) -> np.ndarray:
    return vartheta_jet(rho, 0)[0]


def _radial_laplacian_jet(g: np.ndarray, r: np.ndarray, d: int) -> np.ndarray:
    """Jet of Δg = g'' + (d-1)g'/r from the jet of a radial g, two orders shorter (r > 0)."""
    n = g.shape[0] - 1
    out = np.empty((n - 1,) + r.shape)
    inv_r = [(-1) ** j * math.factorial(j) / r ** (j + 1) for j in range(n - 1)]
    for k in range(n - 1):
        term = g[k + 2].copy()
        if d > 1:
            for j in range(k + 1):
                term += (d - 1) * comb(k, j, exact=True) * g[k - j + 1] * inv_r[j]
        out[k] = term
    return out


@dataclass(frozen=True, eq=False)
class CutoffProfile:
    """φ_R(x) = R²ϑ(|x|/R) sampled on a grid with the radial data the virial identity needs."""
    grid: Grid
    R: float
    phi: np.ndarray
    dphi: np.ndarray
    d2phi: np.ndarray
    dphi_over_r: np.ndarray
    hess_coeff: np.ndarray
    lap: np.ndarray
    lap_d1_over_r: np.ndarray
    lap_hess_coeff: np.ndarray
    bilap: np.ndarray
    trilap: np.ndarray
    checks: dict = field(default_factory=dict)

    @staticmethod
    def zeta(rho) -> np.ndarray:
        return zeta(rho)

    @staticmethod
    def vartheta(rho) -> np.ndarray:
        return vartheta(rho)

    @property
    def grad(self) -> List[np.ndarray]:
        return [self.dphi_over_r * x for x in self.grid.coords]

    @property
    def grad_sup(self) -> float:
        return float(np.abs(self.dphi).max())


def build_cutoff_profile(grid: Grid, R: float, tol: float = PROFILE_TOL) -> CutoffProfile:
    if not 4.0 * grid.spacing <= R <= grid.half_width / 2.0:
        raise RadiusOutOfRange(
            f"R={R} must satisfy 4h = {4.0 * grid.spacing:g} <= R <= L/2 = {grid.half_width / 2.0:g}"
        )
    d = grid.dim
    r = grid.radius
    rho = r / R
    outer = rho >= 1.0
    ro = r[outer]
    scale = np.array([R ** (2 - j) for j in range(JET_ORDER + 1)]).reshape((-1,) + (1,) * ro.ndim)
    jet = vartheta_jet(rho[outer]) * scale
    lap1 = _radial_laplacian_jet(jet, ro, d)
    lap2 = _radial_laplacian_jet(lap1, ro, d)
    lap3 = _radial_laplacian_jet(lap2, ro, d)

    def inner_outer(inner_value, outer_values):
        arr = np.full(r.shape, float(inner_value)) if np.isscalar(inner_value) else inner_value.astype(float)
        arr[outer] = outer_values
        return arr

    profile = CutoffProfile(
        grid=grid,
        R=float(R),
        phi=inner_outer(r ** 2, jet[0]),
        dphi=inner_outer(2.0 * r, jet[1]),
        d2phi=inner_outer(2.0, jet[2]),
        dphi_over_r=inner_outer(2.0, jet[1] / ro),
        hess_coeff=inner_outer(0.0, jet[2] / ro ** 2 - jet[1] / ro ** 3),
        lap=inner_outer(2.0 * d, lap1[0]),
        lap_d1_over_r=inner_outer(0.0, lap1[1] / ro),
        lap_hess_coeff=inner_outer(0.0, lap1[2] / ro ** 2 - lap1[1] / ro ** 3),
        bilap=inner_outer(0.0, lap2[0]),
        trilap=inner_outer(0.0, lap3[0]),
    )

    interior = r <= R - 2.0 * grid.spacing
    checks = {
        "d2phi_min": float(profile.d2phi.min()),
        "d2phi_max_minus_2": float(profile.d2phi.max() - 2.0),
        "dphi_over_r_min": float(profile.dphi_over_r.min()),
        "dphi_over_r_max_minus_2": float(profile.dphi_over_r.max() - 2.0),
        "lap_defect_min": float((2.0 * d - profile.lap).min()),
        "interior_error": float(np.abs(profile.phi[interior] - r[interior] ** 2).max()) if interior.any() else 0.0,
    }
    checks["ok"] = (
        checks["d2phi_min"] >= -tol and checks["d2phi_max_minus_2"] <= tol
        and checks["dphi_over_r_min"] >= -tol and checks["dphi_over_r_max_minus_2"] <= tol
        and checks["lap_defect_min"] >= -tol and checks["interior_error"] <= 1e-12 * max(1.0, R * R)
    )
    profile.checks.update(checks)
    if not checks["ok"]:
        logger.error(f"❌ cutoff profile at R={R:g} violates its bounds: {checks}")
    return profile


@dataclass(frozen=True, eq=False)
class SmoothCutoff:
    """χ_R(x) = χ(|x|/R), 1 on |x| ≤ R/2 and 0 on |x| ≥ R."""
    grid: Grid
    R: float
    values: np.ndarray

    def as_field(self) -> Field:
        return Field(self.grid, self.values.astype(complex), PHYSICAL)


def make_smooth_cutoff(grid: Grid, R: float) -> SmoothCutoff:
    if not R > 0:
        raise RadiusOutOfRange(f"R must be positive, got {R}")
    return SmoothCutoff(grid, float(R), smooth_cutoff_profile(grid.radius / R))


def virial_quantity(u: Field, prof: CutoffProfile) -> float:
    """M_φ(u) = 2 Im ∫ ∇φ·∇u ū."""
    check_same_grid(u.grid, prof.grid)
    values = u.physical().values
    grads = gradient(u)
    integrand = sum(gphi * gu for gphi, gu in zip(prof.grad, grads)) * np.conj(values)
    return 2.0 * u.grid.cell_volume * float(np.sum(integrand).imag)


def virial_rate_rhs(u: Field, prof: CutoffProfile, p: PhysParams, w: WeightField) -> dict:
    """Every term of the localized virial identity for d/dt M_φ along the flow."""
    check_same_grid(u.grid, prof.grid)
    check_weight(u, w, p.b)
    grid = u.grid
    vol = grid.cell_volume
    values = u.physical().values
    dens = np.abs(values) ** 2
    grads = gradient(u)
    hess = hessian(u)
    x = grid.coords
    grad_sq = sum(np.abs(g) ** 2 for g in grads)
    x_grad_sq = np.abs(sum(xk * g for xk, g in zip(x, grads))) ** 2
    hess_sq = sum(np.abs(hess[j][k]) ** 2 for j in range(grid.dim) for k in range(grid.dim))
    x_hess_sq = sum(np.abs(sum(x[k] * hess[j][k] for k in range(grid.dim))) ** 2 for j in range(grid.dim))
    modulus_pow = w.values * np.abs(values) ** (p.alpha + 2.0)
    nonlinear_coeff = (2.0 * p.alpha * prof.d2phi
                       + (2.0 * (grid.dim - 1) * p.alpha + 4.0 * w.homogeneity) * prof.dphi_over_r)

    terms = {
        "lap3": vol * float(np.sum(prof.trilap * dens)),
        "lap2_gradient": -2.0 * vol * float(np.sum(prof.bilap * grad_sq)),
        "hessian_lap": -4.0 * vol * float(np.sum(prof.lap_d1_over_r * grad_sq + prof.lap_hess_coeff * x_grad_sq)),
        "mu_lap2": -p.mu * vol * float(np.sum(prof.bilap * dens)),
        "second_derivatives": 8.0 * vol * float(np.sum(prof.dphi_over_r * hess_sq + prof.hess_coeff * x_hess_sq)),
        "mu_gradient": 4.0 * p.mu * vol * float(np.sum(prof.dphi_over_r * grad_sq + prof.hess_coeff * x_grad_sq)),
        "nonlinear": -p.kappa / (p.alpha + 2.0) * vol * float(np.sum(nonlinear_coeff * modulus_pow)),
    }
    terms["total"] = sum(terms.values())
    return terms


def interior_mass_fraction(u: Field, R: float) -> float:
    dens = np.abs(u.physical().values) ** 2
    total = float(dens.sum())
    if total == 0:
        return 1.0
    return float(dens[u.grid.radius < R].sum()) / total


def virial_rate_check(traj: TrajectoryRecord, prof: CutoffProfile, p: PhysParams, w: WeightField,
                      rtol: float = RATE_RTOL, support_tol: float = SUPPORT_TOL) -> dict:
    """Central differences of M_φ(t) against the identity's right-hand side.

    For data supported where φ = |x|² the right-hand side equals 8·G with the weight-consistent G.
    """
    series = traj.field_series()
    if len(series) < 3:
        raise InsufficientSnapshots(f"virial_rate_check needs 3 field snapshots, got {len(series)}")
    times = np.array([t for t, _ in series])
    fields = [f for _, f in series]

    worst_fraction = min(interior_mass_fraction(f, prof.R) for f in fields)
    if worst_fraction < 1.0 - support_tol:
        reason = f"only {worst_fraction:.10f} of the mass lies inside |x| < R={prof.R:g}"
        logger.warning(f"⚠️ virial rate check skipped: {reason}")
        return {"skipped": True, "reason": reason, "passed": None, "max_rel_discrepancy": None, "table": None}

    m_values = np.array([virial_quantity(f, prof) for f in fields])
    rows = []
    for j in range(1, len(fields) - 1):
        rate = (m_values[j + 1] - m_values[j - 1]) / (times[j + 1] - times[j - 1])
        rhs = virial_rate_rhs(fields[j], prof, p, w)["total"]
        g_val = pohozaev_weighted(fields[j], p, w)
        rows.append({
            "t": times[j],
            "M": m_values[j],
            "rate_fd": rate,
            "rhs": rhs,
            "eight_G": 8.0 * g_val,
            "rel_discrepancy": abs(rate - rhs) / abs(rhs) if rhs != 0 else abs(rate),
            "ratio_to_G": rate / g_val if g_val != 0 else float("nan"),
        })
    table = pd.DataFrame(rows)
    worst = float(table["rel_discrepancy"].max())
    passed = worst <= rtol
    log = logger.info if passed else logger.warning
    log(f"{'✅' if passed else '⚠️'} virial rate: max relative discrepancy {worst:.2e} (tolerance {rtol:.0e})")
    return {"skipped": False, "reason": None, "passed": passed, "max_rel_discrepancy": worst, "table": table}


def cutoff_identity_check(f: Field, chi: SmoothCutoff, resolved_tail: float = CUTOFF_RESOLVED_TAIL) -> dict:
    """Relative mismatch of the product rules for ‖∇(χf)‖² and ‖Δ(χf)‖², term by term."""
    check_same_grid(f.grid, chi.grid)
    grid = f.grid
    vol = grid.cell_volume
    c_field = chi.as_field()
    tail = spectral_tail(c_field)
    resolved = tail <= resolved_tail
    if not resolved:
        logger.warning(f"⚠️ cutoff at R={chi.R:g} is under-resolved (spectral tail {tail:.2e})")

    u = f.physical().values
    c = chi.values
    cf = Field(grid, c * u, PHYSICAL)
    grad_c = [g.real for g in gradient(c_field)]
    hess_c = [[h.real for h in row] for row in hessian(c_field)]
    lap_c = laplacian(c_field).values.real
    grad_u = gradient(f)
    lap_u = laplacian(f).values
    grad_u_sq = sum(np.abs(g) ** 2 for g in grad_u)
    grad_c_sq = sum(g ** 2 for g in grad_c)
    dens = np.abs(u) ** 2

    lhs1 = vol * float(sum(np.abs(g) ** 2 for g in gradient(cf)).sum())
    rhs1 = vol * float(np.sum(c ** 2 * grad_u_sq - c * lap_c * dens))

    lhs2 = vol * float(np.sum(np.abs(laplacian(cf).values) ** 2))
    cross_hess = sum(grad_u[k] * hess_c[k][l] * np.conj(grad_u[l])
                     for k in range(grid.dim) for l in range(grid.dim))
    grad_c_dot_grad_u = sum(gc * gu for gc, gu in zip(grad_c, grad_u))
    rhs2 = vol * float(np.sum(
        c ** 2 * np.abs(lap_u) ** 2
        + lap_c ** 2 * dens
        - 4.0 * (c * cross_hess).real
        + 2.0 * grad_c_sq * grad_u_sq
        + 2.0 * c * lap_c * grad_u_sq
        + 2.0 * (c * lap_u * lap_c * np.conj(u)).real
        + 4.0 * (grad_c_dot_grad_u * lap_c * np.conj(u)).real
    ))

    def rel(a, b):
        scale = max(abs(a), abs(b))
        return abs(a - b) / scale if scale > 0 else 0.0

    return {"err1": rel(lhs1, rhs1), "err2": rel(lhs2, rhs2), "resolved": resolved, "spectral_tail": tail}


def spacetime_growth_fit(traj: TrajectoryRecord, ce: CriticalExponents, n_dyadic: int = 4,
                         min_span: float = MIN_GROWTH_SPAN, slack: float = GROWTH_SLACK) -> dict:
    """Log-log slope of ∫₀^T P(u(t))dt over dyadic T ≤ t_end, compared with the growth exponent."""
    if not traj.times:
        raise SpanTooShort("trajectory has no snapshots")
    times = np.asarray(traj.times, dtype=float)
    acc = np.asarray(traj.accumulated_potential, dtype=float)
    span = times[-1] - times[0]
    if span < min_span:
        raise SpanTooShort(f"trajectory spans {span:g} time units, at least {min_span:g} needed")
    if traj.verdict != COMPLETED:
        logger.warning(f"⚠️ growth fit on a trajectory that ended with '{traj.verdict}'")

    horizons = times[-1] / 2.0 ** np.arange(n_dyadic)[::-1]
    horizons = horizons[horizons > times[0]]
    if horizons.size < 2:
        raise SpanTooShort(f"fewer than two dyadic horizons fit in [{times[0]:g}, {times[-1]:g}]")
    values = np.interp(horizons, times, acc)
    fit = stats.linregress(np.log(horizons), np.log(values))
    exponent = float(fit.slope)
    passed = exponent <= ce.rho_growth + slack
    logger.info(f"{'✅' if passed else '⚠️'} space-time growth exponent {exponent:.4f} "
                f"(bound {ce.rho_growth:.4f} + {slack})")
    return {
        "exponent": exponent,
        "r2": float(fit.rvalue ** 2),
        "pass": passed,
        "rho_growth": ce.rho_growth,
        "verdict": traj.verdict,
        "table": pd.DataFrame({"T": horizons, "accumulated_potential": values}),
    }
