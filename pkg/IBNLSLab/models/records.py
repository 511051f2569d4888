from dataclasses import dataclass, field, asdict
from typing import List, Optional

import pandas as pd

from IBNLSLab.models.params import PhysParams

COMPLETED = "completed"
RESOLUTION_LOST = "resolution-lost"
ENERGY_DRIFT = "energy-drift"

ADAPT_NONE = "none"
ADAPT_HALVE = "halve-on-drift"


@dataclass(frozen=True)
class FunctionalSnapshot:
    mass: float
    energy: float
    action: float
    pohozaev: float
    potential: float
    grad_l2: float
    lap_l2: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class IntegratorConfig:
    dt: float
    t_end: float
    snapshot_stride: int = 1
    dealias: bool = False
    adapt: str = ADAPT_NONE
    drift_threshold: float = 1e-5
    max_halvings: int = 4
    nonlinear: bool = True
    keep_fields: bool = True
    tail_limit: float = 1e-3


@dataclass
class EvolveState:
    """Everything needed to continue a run bit-identically from a snapshot boundary."""
    field: object
    step: int
    t: float
    dt: float
    mass0: float
    energy0: float
    accumulated_potential: float
    mass_drift_max: float
    energy_drift_max: float
    h2_initial: float
    potential_last: float


@dataclass
class TrajectoryRecord:
    times: List[float] = field(default_factory=list)
    snapshots: List[FunctionalSnapshot] = field(default_factory=list)
    fields: List[Optional[object]] = field(default_factory=list)
    mass_drift: List[float] = field(default_factory=list)
    energy_drift: List[float] = field(default_factory=list)
    accumulated_potential: List[float] = field(default_factory=list)
    h2_norms: List[float] = field(default_factory=list)
    step_sizes: List[float] = field(default_factory=list)
    verdict: str = COMPLETED
    final_state: Optional[EvolveState] = None
    halvings: int = 0

    def field_series(self):
        """(t, Field) pairs for the snapshots that kept their field."""
        return [(t, f) for t, f in zip(self.times, self.fields) if f is not None]

    def to_dataframe(self) -> pd.DataFrame:
        rows = []
        for i, t in enumerate(self.times):
            s = self.snapshots[i]
            rows.append({
                "t": t,
                "M": s.mass,
                "E": s.energy,
                "S": s.action,
                "G": s.pohozaev,
                "P": s.potential,
                "mass_drift": self.mass_drift[i],
                "energy_drift": self.energy_drift[i],
                "accumulated_potential": self.accumulated_potential[i],
                "h2": self.h2_norms[i],
                "dt": self.step_sizes[i],
            })
        return pd.DataFrame(rows, columns=[
            "t", "M", "E", "S", "G", "P", "mass_drift", "energy_drift", "accumulated_potential", "h2", "dt",
        ])


@dataclass
class GroundState:
    field: object
    params: PhysParams
    weight: object
    omega: float
    residual: float
    snapshot: FunctionalSnapshot
    m_threshold: float
    c_opt: Optional[float]
    iterations: int
    converged: bool = True

    def summary(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "omega": self.omega,
            "residual": self.residual,
            "m_threshold": self.m_threshold,
            "c_opt": self.c_opt,
            "iterations": self.iterations,
            "converged": self.converged,
            "functionals": self.snapshot.to_dict(),
            "grid": self.field.grid.describe(),
            "origin_corrected": self.weight.corrected,
            "eps_reg": self.weight.eps_reg,
        }


@dataclass
class PohozaevReport:
    ratio1: Optional[float]
    ratio2: Optional[float]
    nehari_defect: float
    pohozaev_defect: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ThresholdReport:
    S_val: float
    G_val: float
    m_val: float
    a_verdict: str
    b_verdict: Optional[str] = None
    omega0: Optional[float] = None
    F_omega0: Optional[float] = None
    agreement: Optional[bool] = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class AuditRow:
    index: int
    b_verdict: str
    union_verdict: str
    agree: bool
    in_band: bool
    energy_margin: float
    gradient_margin: float
    pohozaev_margin: float
    omega0: float
    F_omega0: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class AuditReport:
    rows: List[AuditRow]
    agreement_fraction: float
    band: float

    @property
    def disagreements(self) -> List[AuditRow]:
        return [row for row in self.rows if not row.agree]

    def to_dataframe(self) -> pd.DataFrame:
        return pd.DataFrame([row.to_dict() for row in self.rows])


@dataclass
class ScatterVerdict:
    status: str
    cauchy_series: List[float]
    potential_series: List[float]
    lk_norm_series: List[float]
    u_plus: Optional[object] = None
    tail_error: Optional[float] = None
    reasons: List[str] = field(default_factory=list)

    def to_dataframe(self, times: List[float]) -> pd.DataFrame:
        cauchy = [float("nan")] + list(self.cauchy_series)
        return pd.DataFrame({
            "t": times,
            "cauchy_increment": cauchy,
            "potential": self.potential_series,
            "lk_lr2": self.lk_norm_series,
        })

    def summary(self) -> dict:
        return {
            "status": self.status,
            "tail_error": self.tail_error,
            "reasons": self.reasons,
            "final_potential_ratio": (self.potential_series[-1] / self.potential_series[0]
                                      if self.potential_series and self.potential_series[0] > 0 else None),
        }
