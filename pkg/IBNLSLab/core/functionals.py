import logging
import math

import numpy as np
from scipy import optimize

from IBNLSLab.core.grid import Field, WeightField, check_weight, dilate, fft
from IBNLSLab.errors import ZeroField, NoBracket
from IBNLSLab.models.params import PhysParams
from IBNLSLab.models.records import FunctionalSnapshot

logger = logging.getLogger("ibnls.functionals")

LAMBDA_TOL = 1e-10
LAMBDA_MAX_ITER = 200


def _quadratic_parts(f: Field):
    grid = f.grid
    u = f.physical().values
    uhat = fft(u)
    dens_hat = np.abs(uhat) ** 2
    vol = grid.cell_volume
    mass = vol * float(np.sum(np.abs(u) ** 2))
    grad_l2 = vol * float(np.sum(grid.ksq * dens_hat))
    lap_l2 = vol * float(np.sum(grid.ksq ** 2 * dens_hat))
    return u, mass, grad_l2, lap_l2


def potential(f: Field, p: PhysParams, w: WeightField) -> float:
    """P(f) = ∫|x|^{-b}|f|^{α+2}."""
    check_weight(f, w, p.b)
    u = f.physical().values
    return f.grid.cell_volume * float(np.sum(w.values * np.abs(u) ** (p.alpha + 2.0)))


def snapshot_from_parts(mass, grad_l2, lap_l2, pot, p: PhysParams) -> FunctionalSnapshot:
    energy = 0.5 * lap_l2 + 0.5 * p.mu * grad_l2 - p.kappa * pot / (p.alpha + 2.0)
    return FunctionalSnapshot(
        mass=mass,
        energy=energy,
        action=energy + 0.5 * p.omega * mass,
        pohozaev=2.0 * lap_l2 + p.mu * grad_l2 - p.kappa * p.pohozaev_coeff * pot,
        potential=pot,
        grad_l2=grad_l2,
        lap_l2=lap_l2,
    )


def evaluate_functionals(f: Field, p: PhysParams, w: WeightField) -> FunctionalSnapshot:
    """Mass, energy, action, Pohozaev functional and weighted potential of f."""
    check_weight(f, w, p.b)
    u, mass, grad_l2, lap_l2 = _quadratic_parts(f)
    pot = f.grid.cell_volume * float(np.sum(w.values * np.abs(u) ** (p.alpha + 2.0)))
    return snapshot_from_parts(mass, grad_l2, lap_l2, pot, p)


def pohozaev_weighted(f: Field, p: PhysParams, w: WeightField) -> float:
    """G with b replaced by the weight's exact homogeneity; equals G when eps_reg = 0."""
    check_weight(f, w, p.b)
    u, _, grad_l2, lap_l2 = _quadratic_parts(f)
    dens = w.values * np.abs(u) ** (p.alpha + 2.0)
    coeff = (p.d * p.alpha + 2.0 * w.homogeneity) / (2.0 * (p.alpha + 2.0))
    nonlinear = f.grid.cell_volume * float(np.sum(coeff * dens))
    return 2.0 * lap_l2 + p.mu * grad_l2 - p.kappa * nonlinear


def rescaled_functionals(s: FunctionalSnapshot, lam: float, p: PhysParams) -> FunctionalSnapshot:
    """Functionals of f_λ = λ^{d/2} f(λ·) from the base integrals of f."""
    return snapshot_from_parts(
        s.mass,
        lam ** 2 * s.grad_l2,
        lam ** 4 * s.lap_l2,
        lam ** ((p.d * p.alpha + 2.0 * p.b) / 2.0) * s.potential,
        p,
    )


def coercivity_ratio(s: FunctionalSnapshot) -> float:
    return s.pohozaev / s.potential if s.potential > 0 else float("nan")


def weinstein(f: Field, p: PhysParams, w: WeightField) -> float:
    """W(f) = P(f) / (‖Δf‖^{(dα+2b)/4} ‖f‖^{(8-2b-(d-4)α)/4})."""
    s = evaluate_functionals(f, p, w)
    if s.mass == 0 or s.lap_l2 == 0:
        raise ZeroField("Weinstein functional is undefined for f = 0")
    return s.potential / _gn_scale(s, p)


def _gn_scale(s: FunctionalSnapshot, p: PhysParams) -> float:
    # ‖Δf‖^{x/4} = (‖Δf‖²)^{x/8}
    return s.lap_l2 ** ((p.d * p.alpha + 2.0 * p.b) / 8.0) * s.mass ** (p.mass_exponent / 8.0)


def gn_defect(f: Field, c_opt: float, p: PhysParams, w: WeightField) -> float:
    s = evaluate_functionals(f, p, w)
    if s.mass == 0:
        return 0.0
    return c_opt * _gn_scale(s, p) - s.potential


def mass_critical_rescale(f: Field, lam: float) -> Field:
    """f_λ(x) = λ^{d/2} f(λx)."""
    return dilate(f, lam, lam ** (f.grid.dim / 2.0))


def find_lambda0(f: Field, p: PhysParams, w: WeightField,
                 tol: float = LAMBDA_TOL, max_iter: int = LAMBDA_MAX_ITER) -> float:
    """Unique λ₀ > 0 with G(f_{λ₀}) = 0: doubling bracket, then Brent in log λ."""
    s = evaluate_functionals(f, p, w)
    if s.mass == 0:
        raise ZeroField("find_lambda0 needs f != 0")
    c_term = p.kappa * p.pohozaev_coeff * s.potential
    if c_term <= 0:
        raise NoBracket("G(f_λ) never becomes negative: the nonlinear term vanishes or is defocusing")

    delta = (p.d * p.alpha + 2.0 * p.b - 8.0) / 2.0

    def phi(log_lam):
        lam = math.exp(log_lam)
        return 2.0 * s.lap_l2 + p.mu * s.grad_l2 * lam ** -2 - c_term * lam ** delta

    lo, hi = 0.0, 0.0
    for _ in range(max_iter):
        if phi(hi) < 0:
            break
        hi += math.log(2.0)
    else:
        raise NoBracket("no sign change of G(f_λ) found for large λ")
    for _ in range(max_iter):
        if phi(lo) > 0:
            break
        lo -= math.log(2.0)
    else:
        raise NoBracket("no sign change of G(f_λ) found for small λ")

    lam0 = math.exp(optimize.brentq(phi, lo, hi, xtol=tol, maxiter=max_iter))
    logger.debug(f"λ₀ = {lam0:.12g}")
    return lam0
