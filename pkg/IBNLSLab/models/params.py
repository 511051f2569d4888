from dataclasses import dataclass, asdict
from typing import Optional

VARIATIONAL = "variational"
EVOLUTION = "evolution"

MASS_SUBCRITICAL = "mass-subcritical"
MASS_CRITICAL = "mass-critical"
INTERCRITICAL = "intercritical"
ENERGY_CRITICAL = "energy-critical"
SUPERCRITICAL = "supercritical"


@dataclass(frozen=True)
class PhysParams:
    """Model parameters of i u_t - Δ²u + μΔu = -κ|x|^{-b}|u|^α u, plus the frequency ω of the action."""
    d: int
    mu: float
    b: float
    alpha: float
    kappa: int = 1
    omega: float = 1.0

    @property
    def focusing(self) -> bool:
        return self.kappa > 0

    @property
    def gamma_c(self) -> float:
        return self.d / 2.0 - (4.0 - self.b) / self.alpha

    @property
    def pohozaev_coeff(self) -> float:
        """(dα+2b)/(2(α+2)), the weight of P inside G."""
        return (self.d * self.alpha + 2.0 * self.b) / (2.0 * (self.alpha + 2.0))

    @property
    def mass_exponent(self) -> float:
        """8 - 2b - (d-4)α; positive below the energy-critical power."""
        return 8.0 - 2.0 * self.b - (self.d - 4) * self.alpha

    @property
    def dilation_exponent(self) -> float:
        """dα - 8 + 2b; positive above the mass-critical power."""
        return self.d * self.alpha - 8.0 + 2.0 * self.b

    def with_omega(self, omega: float) -> "PhysParams":
        return PhysParams(self.d, self.mu, self.b, self.alpha, self.kappa, omega)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Regime:
    tag: str
    radial_required: bool
    gamma_c: float
    scattering_covered: bool = False
    reason: Optional[str] = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class CriticalExponents:
    gamma_c: float
    sigma_c: float
    q: float
    r: float
    k: float
    m: float
    rho_growth: float

    def to_dict(self) -> dict:
        return asdict(self)
