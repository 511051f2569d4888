import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy import stats

from IBNLSLab.core.grid import (
    Grid, Field, PHYSICAL, SPECTRAL, check_same_grid, fft, ifft, boundary_mass_fraction,
)
from IBNLSLab.errors import WraparoundDetected

logger = logging.getLogger("ibnls.propagator")

PHASE_WARN = 2.0 * math.pi * 1e12
WRAP_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class LinearSymbol:
    """Phase rates ω(ξ) = |ξ|⁴ + μ|ξ|² of U_μ(t) = exp(-it(Δ² - μΔ))."""
    grid: Grid
    mu: float
    table: np.ndarray

    @cached_property
    def max_rate(self) -> float:
        return float(self.table.max())

    def phase(self, t: float) -> np.ndarray:
        if abs(t) * self.max_rate > PHASE_WARN:
            logger.warning(f"⚠️ |t·ω(ξ)| = {abs(t) * self.max_rate:.3e} exceeds 2π·1e12; phase accuracy degrades")
        return np.exp(-1j * t * self.table)


def make_symbol(grid: Grid, mu: float) -> LinearSymbol:
    k2 = grid.ksq
    return LinearSymbol(grid, float(mu), k2 * k2 + mu * k2)


def linear_evolve(f: Field, t: float, sym: LinearSymbol) -> Field:
    """U_μ(t)f; the result is returned in the same space as f."""
    check_same_grid(f.grid, sym.grid)
    if f.space == SPECTRAL:
        return Field(f.grid, sym.phase(t) * f.values, SPECTRAL)
    return Field(f.grid, ifft(sym.phase(t) * fft(f.values)), PHYSICAL)


def group_property_check(f: Field, t1: float, t2: float, sym: LinearSymbol) -> float:
    """‖U(t1+t2)f - U(t1)U(t2)f‖_{L²}."""
    joint = linear_evolve(f, t1 + t2, sym).physical()
    split = linear_evolve(linear_evolve(f, t2, sym), t1, sym).physical()
    return Field(f.grid, joint.values - split.values).l2()


def dispersive_decay_fit(f: Field, t_grid: Sequence[float], sym: LinearSymbol,
                         wrap_tol: float = WRAP_TOL) -> dict:
    """Fit the exponent of ‖U(t)f‖_{L^∞} against t on a log-log scale."""
    check_same_grid(f.grid, sym.grid)
    times = np.asarray(sorted(t_grid), dtype=float)
    if times.size < 2 or times[0] <= 0:
        raise ValueError("dispersive_decay_fit needs at least two positive times")
    initial_band = boundary_mass_fraction(f)
    if initial_band > 1e-10:
        logger.warning(f"⚠️ initial data carries {initial_band:.2e} of its mass in the boundary band")

    fhat = f.spectral().values
    sup_norms = []
    for t in times:
        u = Field(f.grid, ifft(sym.phase(t) * fhat), PHYSICAL)
        band = boundary_mass_fraction(u)
        if band > wrap_tol:
            raise WraparoundDetected(
                f"boundary mass {band:.2e} exceeds {wrap_tol:.0e} at t={t:g}; the window passes wraparound"
            )
        sup_norms.append(float(np.abs(u.values).max()))

    fit = stats.linregress(np.log(times), np.log(sup_norms))
    return {"slope": float(fit.slope), "r2": float(fit.rvalue ** 2), "sup_norms": sup_norms}
