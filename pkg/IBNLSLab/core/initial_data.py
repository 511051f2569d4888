import logging

import numpy as np

from IBNLSLab.core.grid import Field, Grid, spectral_tail
from IBNLSLab.data.snapshot_io import SnapshotStore
from IBNLSLab.errors import GridMismatch

logger = logging.getLogger("ibnls.initial")

# random bumps stay inside this fraction of the half width
CENTER_FRACTION = 0.25


def ring_data(grid: Grid, amplitude: float = 1.0, width: float = 1.0, radius: float = 4.0) -> Field:
    """Radial bump amplitude·exp(-(|x|-radius)²/(2 width²)); a pair of bumps in 1D."""
    r = grid.radius
    return Field(grid, (amplitude * np.exp(-(r - radius) ** 2 / (2.0 * width ** 2))).astype(complex))


def random_smooth_field(grid: Grid, rng: np.random.Generator, modes: int = 3, width: float = 1.0,
                        amplitude: float = 1.0) -> Field:
    """Sum of `modes` Gaussian bumps with random centers, widths and complex amplitudes."""
    values = np.zeros(grid.shape, dtype=complex)
    coords = grid.coords
    spread = CENTER_FRACTION * grid.half_width
    for _ in range(modes):
        center = rng.uniform(-spread, spread, size=grid.dim)
        sigma = width * rng.uniform(0.5, 1.5)
        coeff = amplitude * rng.uniform(0.5, 1.0) * np.exp(2j * np.pi * rng.uniform())
        r2 = sum((x - c) ** 2 for x, c in zip(coords, center))
        values += coeff * np.exp(-r2 / (2.0 * sigma ** 2))
    f = Field(grid, values)
    tail = spectral_tail(f)
    if tail > 1e-10:
        logger.warning(f"⚠️ random field is under-resolved (spectral tail {tail:.2e}); widen the bumps")
    return f


def load_field(path: str, grid: Grid) -> Field:
    f = SnapshotStore().load(path)
    if f.grid != grid:
        raise GridMismatch(f"field in {path} lives on {f.grid.describe()}, the run uses {grid.describe()}")
    return f.physical()
