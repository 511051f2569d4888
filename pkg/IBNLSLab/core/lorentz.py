import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss

from IBNLSLab.core.grid import Field, PHYSICAL
from IBNLSLab.errors import InvalidExponent, EmptySeries, SpaceMismatch

logger = logging.getLogger("ibnls.lorentz")

# samples whose moduli agree to this relative tolerance form one level plateau
PLATEAU_RTOL = 1e-12
MIDPOINT = "midpoint"
RIGHT = "right"


@dataclass
class RearrangementProfile:
    """Piecewise-constant decreasing rearrangement: f*(s) = sorted_values[k] on [k·μ, (k+1)·μ)."""
    sorted_values: np.ndarray
    cell_measure: float
    levels: np.ndarray
    distribution: np.ndarray
    s_samples: np.ndarray
    f_star: np.ndarray

    @property
    def total_measure(self) -> float:
        return self.cell_measure * self.sorted_values.size

    def f_star_at(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        idx = np.floor(s / self.cell_measure).astype(np.int64)
        out = np.zeros(s.shape)
        inside = (idx >= 0) & (idx < self.sorted_values.size)
        out[inside] = self.sorted_values[idx[inside]]
        return out


def _check_physical(f: Field):
    if f.space != PHYSICAL:
        raise SpaceMismatch("Lorentz norms are computed from physical-space samples")


def _sorted_moduli(f: Field) -> np.ndarray:
    return np.sort(np.abs(f.values).ravel())[::-1]


def _plateau_starts(a: np.ndarray) -> np.ndarray:
    """Indices where a new level plateau begins in the descending array a."""
    if a.size == 0:
        return np.zeros(0, dtype=np.int64)
    breaks = np.flatnonzero(a[1:] < a[:-1] * (1.0 - PLATEAU_RTOL)) + 1
    return np.concatenate(([0], breaks))


def decreasing_rearrangement(f: Field, n_samples: int = 256) -> RearrangementProfile:
    _check_physical(f)
    a = _sorted_moduli(f)
    mu = f.grid.cell_volume
    starts = _plateau_starts(a)
    levels = a[starts]
    # d_f(λ) = |{|f| > λ}| is the measure before the plateau at λ starts
    distribution = starts * mu
    s_max = a.size * mu
    s_samples = np.geomspace(mu / 2.0, s_max, n_samples)
    profile = RearrangementProfile(a, mu, levels, distribution, s_samples, np.zeros(n_samples))
    profile.f_star = profile.f_star_at(s_samples)
    return profile


def _power_increments(n: int, p: float) -> np.ndarray:
    """(k+1)^p - k^p for k = 0..n-1 without cancellation."""
    k = np.arange(n, dtype=float)
    out = np.empty(n)
    out[0] = 1.0
    kk = k[1:]
    out[1:] = kk ** p * np.expm1(p * np.log1p(1.0 / kk))
    return out


def _validate_exponents(r: float, rho: float):
    if not r > 1:
        raise InvalidExponent(f"Lorentz exponent r > 1 required, got r={r}")
    if not rho >= 1:
        raise InvalidExponent(f"Lorentz exponent rho >= 1 required, got rho={rho}")


def lorentz_norm(f: Field, r: float, rho: float, sup_rule: str = MIDPOINT) -> float:
    """‖f‖_{L^{r,ρ}} = ((ρ/r)∫(s^{1/r} f*(s))^ρ ds/s)^{1/ρ}, or sup s^{1/r} f*(s) for ρ = ∞."""
    _check_physical(f)
    _validate_exponents(r, rho)
    a = _sorted_moduli(f)
    a = a[a > 0]
    if a.size == 0:
        return 0.0
    mu = f.grid.cell_volume
    return _norm_from_sorted(a, mu, r, rho, sup_rule)


def _norm_from_sorted(a: np.ndarray, mu: float, r: float, rho: float, sup_rule: str) -> float:
    if math.isinf(rho):
        if sup_rule == RIGHT:
            s_right = mu * np.arange(1, a.size + 1, dtype=float)
            return float(np.max(a * s_right ** (1.0 / r)))
        if sup_rule != MIDPOINT:
            raise ValueError(f"unknown sup_rule '{sup_rule}'")
        starts = _plateau_starts(a)
        ends = np.append(starts[1:], a.size)
        s_mid = 0.5 * mu * (starts + ends)
        return float(np.max(a[starts] * s_mid ** (1.0 / r)))

    # closed form per segment: (ρ/r)∫_{s_k}^{s_{k+1}} a^ρ s^{ρ/r - 1} ds = a^ρ (s_{k+1}^{ρ/r} - s_k^{ρ/r})
    p = rho / r
    peak = a[0]
    total = np.sum((a / peak) ** rho * _power_increments(a.size, p))
    return float(peak * (mu ** p * total) ** (1.0 / rho))


def lorentz_norm_star(f: Field, r: float, rho: float, n_nodes: int = 8) -> float:
    """Normable variant built on f**(s) = (1/s)∫₀^s f*; equivalent to lorentz_norm for r > 1."""
    _check_physical(f)
    _validate_exponents(r, rho)
    a = _sorted_moduli(f)
    a = a[a > 0]
    if a.size == 0:
        return 0.0
    mu = f.grid.cell_volume
    peak = a[0]
    a = a / peak
    n = a.size
    s_left = mu * np.arange(n, dtype=float)
    cum = np.concatenate(([0.0], mu * np.cumsum(a)))

    nodes, weights = leggauss(n_nodes)
    # nodes mapped to each segment [s_k, s_k + μ]
    s = s_left[:, None] + 0.5 * mu * (nodes[None, :] + 1.0)
    f_ss = (cum[:-1, None] + a[:, None] * (s - s_left[:, None])) / s

    if math.isinf(rho):
        body = np.max(s ** (1.0 / r) * f_ss)
        tail = cum[-1] * (n * mu) ** (1.0 / r - 1.0)
        return float(peak * max(body, tail))

    integrand = (s ** (1.0 / r) * f_ss) ** rho / s
    body = np.sum(0.5 * mu * integrand * weights[None, :])
    s_n = n * mu
    tail = cum[-1] ** rho * s_n ** (rho * (1.0 / r - 1.0)) / (rho * (1.0 - 1.0 / r))
    return float(peak * ((rho / r) * (body + tail)) ** (1.0 / rho))


def lk_lr2_series(series: Sequence[Tuple[float, Field]], k: float, r: float,
                  t_end: Optional[float] = None) -> List[float]:
    """Running (Σ_{i≤j} Δt_i ‖u(t_i)‖^k_{L^{r,2}})^{1/k} with left-endpoint weights."""
    if len(series) == 0:
        raise EmptySeries("L^k_t L^{r,2}_x accumulation needs at least one snapshot")
    times = np.array([t for t, _ in series], dtype=float)
    if np.any(np.diff(times) <= 0):
        raise ValueError("snapshot times must be strictly increasing")
    dts = np.append(np.diff(times), 0.0 if t_end is None else t_end - times[-1])
    if dts[-1] < 0:
        raise ValueError(f"t_end={t_end} precedes the last snapshot at t={times[-1]}")

    norms = np.array([lorentz_norm(u, r, 2.0) for _, u in series])
    running = np.cumsum(dts * norms ** k)
    return [float(v) for v in running ** (1.0 / k)]


def lk_lr2_accumulate(series: Sequence[Tuple[float, Field]], k: float, r: float,
                      t_end: Optional[float] = None) -> float:
    return lk_lr2_series(series, k, r, t_end)[-1]
