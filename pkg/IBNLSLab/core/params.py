import logging
import math

from IBNLSLab.errors import ParameterOutOfRange
from IBNLSLab.models.params import (
    PhysParams, Regime, CriticalExponents,
    VARIATIONAL, EVOLUTION,
    MASS_SUBCRITICAL, MASS_CRITICAL, INTERCRITICAL, ENERGY_CRITICAL, SUPERCRITICAL,
)

logger = logging.getLogger("ibnls.params")

# regime ties are resolved toward the critical label
GAMMA_TIE_TOL = 1e-12


def validate_params(p: PhysParams, mode: str = EVOLUTION) -> Regime:
    """Check the standing hypotheses for `mode` and classify the regime."""
    if mode not in (VARIATIONAL, EVOLUTION):
        raise ParameterOutOfRange(f"unknown mode '{mode}' (expected {VARIATIONAL} or {EVOLUTION})")
    if not isinstance(p.d, int) or p.d < 1:
        raise ParameterOutOfRange(f"d must be a positive integer, got {p.d!r}")
    if p.mu < 0:
        raise ParameterOutOfRange(f"mu >= 0 required, got mu={p.mu}")
    if p.omega <= 0:
        raise ParameterOutOfRange(f"omega > 0 required, got omega={p.omega}")
    if p.alpha <= 0:
        raise ParameterOutOfRange(f"alpha > 0 required, got alpha={p.alpha}")
    if p.b <= 0:
        raise ParameterOutOfRange(f"b > 0 required, got b={p.b}")
    if p.kappa not in (1, -1):
        raise ParameterOutOfRange(f"kappa must be +1 or -1, got {p.kappa}")

    if mode == VARIATIONAL:
        bound = min(p.d, 4)
        if p.b >= bound:
            raise ParameterOutOfRange(f"b < min(d, 4) = {bound} required, got b={p.b}")
    else:
        bound = min(p.d / 2.0, 4.0)
        if p.b >= bound:
            raise ParameterOutOfRange(f"b < min(d/2, 4) = {bound} required, got b={p.b}")

    if p.d >= 5:
        alpha_max = (8.0 - 2.0 * p.b) / (p.d - 4)
        if p.alpha >= alpha_max:
            raise ParameterOutOfRange(f"alpha < (8-2b)/(d-4) = {alpha_max} required, got alpha={p.alpha}")

    return classify_regime(p)


def classify_regime(p: PhysParams) -> Regime:
    gamma_c = p.gamma_c
    if abs(gamma_c) <= GAMMA_TIE_TOL:
        tag = MASS_CRITICAL
    elif abs(gamma_c - 2.0) <= GAMMA_TIE_TOL:
        tag = ENERGY_CRITICAL
    elif gamma_c < 0:
        tag = MASS_SUBCRITICAL
    elif gamma_c < 2.0:
        tag = INTERCRITICAL
    else:
        tag = SUPERCRITICAL

    covered, radial, reason = _scattering_case(p.d, p.b)
    covered = covered and tag == INTERCRITICAL
    if tag != INTERCRITICAL:
        reason = f"{tag}: threshold theory applies to intercritical powers only"

    return Regime(
        tag=tag,
        radial_required=radial and covered,
        gamma_c=gamma_c,
        scattering_covered=covered,
        reason=reason,
    )


def _scattering_case(d: int, b: float):
    if d >= 5:
        return True, False, "d >= 5: non-radial scattering below threshold"
    if d == 4 and 1.0 < b < 2.0:
        return True, False, "d = 4, 1 < b < 2: non-radial scattering below threshold"
    if d == 4 and 0.0 < b <= 1.0:
        return True, True, "d = 4, 0 < b <= 1: radial data required"
    if d == 3 and 0.0 < b < 1.5:
        return True, True, "d = 3, 0 < b < 3/2: radial data required"
    return False, False, f"d = {d}, b = {b}: scattering below threshold not covered"


def critical_exponents(p: PhysParams, radial: bool = False) -> CriticalExponents:
    validate_params(p, EVOLUTION)
    d, b, a = p.d, p.b, p.alpha
    if a <= (8.0 - 2.0 * b) / d:
        raise ParameterOutOfRange(
            f"alpha > (8-2b)/d = {(8.0 - 2.0 * b) / d} required for the scattering exponents, got alpha={a}"
        )

    gamma_c = p.gamma_c
    q = 8.0 * (a + 2.0) / (d * a + 2.0 * b)
    r = d * (a + 2.0) / (d - b)
    k = 4.0 * a * (a + 2.0) / (8.0 - 2.0 * b - (d - 4) * a)
    m = 4.0 * a * (a + 2.0) / (d * a * a + (d - 4 + 2.0 * b) * a - 8.0 + 2.0 * b)

    if radial and d < 2:
        logger.warning("radial growth exponent 1/3 needs d >= 2; using the non-radial exponent")
        radial = False
    rho_growth = 1.0 / 3.0 if radial else 1.0 / (1.0 + min(2.0, b))

    return CriticalExponents(
        gamma_c=gamma_c,
        sigma_c=(2.0 - gamma_c) / gamma_c,
        q=q, r=r, k=k, m=m,
        rho_growth=rho_growth,
    )


def is_biharmonic_admissible(q: float, r: float, d: int) -> bool:
    if q < 2 or r < 2:
        return False
    if d >= 5 and r > 2.0 * d / (d - 4):
        return False
    if d == 4 and math.isinf(r):
        return False
    lhs = (0.0 if math.isinf(q) else 4.0 / q) + (0.0 if math.isinf(r) else d / r)
    return math.isclose(lhs, d / 2.0, rel_tol=1e-12, abs_tol=1e-12)
