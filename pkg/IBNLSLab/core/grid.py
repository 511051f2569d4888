import logging
from dataclasses import dataclass
from functools import cached_property
from typing import List

import numpy as np
import scipy.fft as sfft
from scipy import integrate, special

from IBNLSLab.errors import (
    InvalidGrid, SpaceMismatch, GridMismatch, SingularOrigin, ParameterOutOfRange, ResolutionLoss,
)

logger = logging.getLogger("ibnls.grid")

PHYSICAL = "physical"
SPECTRAL = "spectral"

# outer fraction of the box treated as the boundary band
BOUNDARY_BAND = 0.1
# modes beyond this fraction of the Nyquist wavenumber count as the spectral tail
TAIL_FRACTION = 2.0 / 3.0


@dataclass(frozen=True)
class Grid:
    """Periodic box [-L, L)^dim sampled with n_points per axis; `shift` offsets samples by h/2."""
    dim: int
    n_points: int
    half_width: float
    shift: bool = False

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.n_points

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dim

    @property
    def shape(self) -> tuple:
        return (self.n_points,) * self.dim

    @property
    def size(self) -> int:
        return self.n_points ** self.dim

    @cached_property
    def axis(self) -> np.ndarray:
        h = self.spacing
        offset = 0.5 * h if self.shift else 0.0
        return h * (np.arange(self.n_points) - self.n_points // 2) + offset

    @cached_property
    def axis_wavenumbers(self) -> np.ndarray:
        return 2.0 * np.pi * sfft.fftfreq(self.n_points, d=self.spacing)

    @cached_property
    def coords(self) -> List[np.ndarray]:
        """Broadcastable (sparse) coordinate arrays, one per axis."""
        return np.meshgrid(*([self.axis] * self.dim), indexing="ij", sparse=True)

    @cached_property
    def wavenumbers(self) -> List[np.ndarray]:
        return np.meshgrid(*([self.axis_wavenumbers] * self.dim), indexing="ij", sparse=True)

    @cached_property
    def radius(self) -> np.ndarray:
        r2 = np.zeros(self.shape)
        for x in self.coords:
            r2 = r2 + x * x
        return np.sqrt(r2)

    @cached_property
    def ksq(self) -> np.ndarray:
        k2 = np.zeros(self.shape)
        for k in self.wavenumbers:
            k2 = k2 + k * k
        return k2

    @cached_property
    def sup_coord(self) -> np.ndarray:
        """max_j |x_j| at every point."""
        s = np.zeros(self.shape)
        for x in self.coords:
            s = np.maximum(s, np.abs(x))
        return s

    @cached_property
    def tail_mask(self) -> np.ndarray:
        kmax = np.pi / self.spacing
        mask = np.zeros(self.shape, dtype=bool)
        for k in self.wavenumbers:
            mask = mask | (np.abs(k) > TAIL_FRACTION * kmax)
        return mask

    @property
    def contains_origin(self) -> bool:
        return not self.shift

    def describe(self) -> dict:
        return {
            "dim": self.dim,
            "n_points": self.n_points,
            "half_width": self.half_width,
            "shift": self.shift,
            "spacing": self.spacing,
        }


@dataclass(frozen=True, eq=False)
class Field:
    grid: Grid
    values: np.ndarray
    space: str = PHYSICAL

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise GridMismatch(f"values shape {self.values.shape} does not match grid shape {self.grid.shape}")
        if self.space not in (PHYSICAL, SPECTRAL):
            raise SpaceMismatch(f"unknown space flag '{self.space}'")

    @classmethod
    def from_function(cls, grid: Grid, func) -> "Field":
        """Sample func(*coords) on the grid."""
        values = np.broadcast_to(func(*grid.coords), grid.shape).astype(complex)
        return cls(grid, values, PHYSICAL)

    @classmethod
    def zeros(cls, grid: Grid) -> "Field":
        return cls(grid, np.zeros(grid.shape, dtype=complex), PHYSICAL)

    def physical(self) -> "Field":
        return self if self.space == PHYSICAL else inverse_transform(self)

    def spectral(self) -> "Field":
        return self if self.space == SPECTRAL else transform(self)

    def scaled(self, c) -> "Field":
        return Field(self.grid, c * self.values, self.space)

    def conj(self) -> "Field":
        return Field(self.grid, np.conj(self.physical().values), PHYSICAL)

    def l2(self) -> float:
        return float(np.sqrt(self.grid.cell_volume * np.sum(np.abs(self.values) ** 2)))

    def mass(self) -> float:
        return self.l2() ** 2


def make_grid(dim: int, n_points: int, half_width: float, shift: bool = False) -> Grid:
    if dim not in (1, 2, 3):
        raise InvalidGrid(f"dim must be 1, 2 or 3, got {dim}")
    if not isinstance(n_points, (int, np.integer)) or n_points < 8 or (n_points & (n_points - 1)) != 0:
        raise InvalidGrid(f"n_points must be a power of two >= 8, got {n_points}")
    if not half_width > 0:
        raise InvalidGrid(f"half_width must be positive, got {half_width}")
    return Grid(int(dim), int(n_points), float(half_width), bool(shift))


def check_same_grid(*grids: Grid):
    first = grids[0]
    for g in grids[1:]:
        if g != first:
            raise GridMismatch(f"grid {g.describe()} does not match {first.describe()}")


def transform(f: Field) -> Field:
    if f.space != PHYSICAL:
        raise SpaceMismatch("transform expects a physical-space field")
    return Field(f.grid, sfft.fftn(f.values, norm="ortho"), SPECTRAL)


def inverse_transform(f: Field) -> Field:
    if f.space != SPECTRAL:
        raise SpaceMismatch("inverse_transform expects a spectral-space field")
    return Field(f.grid, sfft.ifftn(f.values, norm="ortho"), PHYSICAL)


def fft(values: np.ndarray) -> np.ndarray:
    return sfft.fftn(values, norm="ortho")


def ifft(values: np.ndarray) -> np.ndarray:
    return sfft.ifftn(values, norm="ortho")


def spectral_norm(grid: Grid, uhat: np.ndarray, multiplier=None) -> float:
    weights = np.abs(uhat) ** 2 if multiplier is None else np.abs(multiplier * uhat) ** 2
    return float(np.sqrt(grid.cell_volume * np.sum(weights)))


def sobolev_norms(f: Field) -> dict:
    """L², homogeneous H¹ and H², and inhomogeneous H² norms via Fourier multipliers."""
    grid = f.grid
    uhat = f.spectral().values
    k2 = grid.ksq
    return {
        "l2": spectral_norm(grid, uhat),
        "h1dot": spectral_norm(grid, uhat, np.sqrt(k2)),
        "h2dot": spectral_norm(grid, uhat, k2),
        "h2": spectral_norm(grid, uhat, 1.0 + k2),
    }


def laplacian(f: Field) -> Field:
    uhat = f.spectral().values
    return Field(f.grid, ifft(-f.grid.ksq * uhat), PHYSICAL)


def gradient(f: Field) -> List[np.ndarray]:
    uhat = f.spectral().values
    return [ifft(1j * k * uhat) for k in f.grid.wavenumbers]


def hessian(f: Field) -> List[List[np.ndarray]]:
    uhat = f.spectral().values
    ks = f.grid.wavenumbers
    d = f.grid.dim
    out = [[None] * d for _ in range(d)]
    for a in range(d):
        for b in range(a, d):
            out[a][b] = ifft(-ks[a] * ks[b] * uhat)
            out[b][a] = out[a][b]
    return out


def inner(f: Field, g: Field) -> complex:
    """Discrete ⟨f, g⟩ = h^d Σ f ḡ."""
    check_same_grid(f.grid, g.grid)
    return complex(f.grid.cell_volume * np.sum(f.physical().values * np.conj(g.physical().values)))


def spectral_tail(f: Field) -> float:
    """Largest Fourier amplitude outside 2/3 of Nyquist, relative to the peak amplitude."""
    amp = np.abs(f.spectral().values)
    peak = amp.max()
    if peak == 0:
        return 0.0
    return float(amp[f.grid.tail_mask].max() / peak) if f.grid.tail_mask.any() else 0.0


def boundary_mass_fraction(f: Field, band: float = BOUNDARY_BAND) -> float:
    grid = f.grid
    dens = np.abs(f.physical().values) ** 2
    total = dens.sum()
    if total == 0:
        return 0.0
    outer = grid.sup_coord >= (1.0 - band) * grid.half_width
    return float(dens[outer].sum() / total)


# ================================
# Singular weight
# ================================

# even moments matched by the 1D origin stencil
ORIGIN_MOMENTS = 4


@dataclass(frozen=True, eq=False)
class WeightField:
    """Quadrature weights `values` for ∫|x|^{-b}(·) and the pointwise `samples` they start from.

    The two differ only at the few points next to the origin, and only when `corrected` is set.
    """
    grid: Grid
    b: float
    eps_reg: float
    values: np.ndarray
    samples: np.ndarray = None
    corrected: bool = False

    def __post_init__(self):
        if self.samples is None:
            object.__setattr__(self, "samples", self.values)

    @cached_property
    def homogeneity(self) -> np.ndarray:
        """-x·∇w / w = b|x|²/(|x|²+eps²)."""
        r2 = self.grid.radius ** 2
        if self.eps_reg == 0:
            return np.full(self.grid.shape, self.b)
        return self.b * r2 / (r2 + self.eps_reg ** 2)


def half_zeta(s: float) -> float:
    """Hurwitz ζ(s, 1/2) = (2^s - 1) ζ(s), continued to s < 1."""
    return float((2.0 ** s - 1.0) * special.zeta(s))


def lattice_zeta(dim: int, s: float, terms: int = 12) -> float:
    """Continued Σ_{n ∈ (ℤ+½)^dim} |n|^{-s}, s > 0, s != dim, from the theta-function split at t = 1."""
    j = np.arange(terms) + 0.5
    k = np.arange(1, terms + 1)
    sign = (-1.0) ** k

    def large_t(t):
        return t ** (0.5 * s - 1.0) * (2.0 * np.sum(np.exp(-np.pi * t * j * j))) ** dim

    def small_t(u):
        # t = 1/u, Poisson-summed theta
        return u ** (0.5 * (dim - s) - 1.0) * ((1.0 + 2.0 * np.sum(sign * np.exp(-np.pi * k * k * u))) ** dim - 1.0)

    i_large = integrate.quad(large_t, 1.0, np.inf, epsabs=1e-15, epsrel=1e-13)[0]
    i_small = integrate.quad(small_t, 1.0, np.inf, epsabs=1e-15, epsrel=1e-13)[0]
    return float(np.pi ** (0.5 * s) / special.gamma(0.5 * s) * (i_large + i_small + 2.0 / (s - dim)))


def origin_stencil(b: float, moments: int = ORIGIN_MOMENTS) -> np.ndarray:
    """Coefficients a_i at |x| = (i-½)h making the 1D midpoint rule for |x|^{-b}φ exact on x^0, x^2, ...

    Solves Σ_i a_i (i-½)^k = ζ(b-k, ½) for k = 0, 2, ..., 2(moments-1).
    """
    k = 2.0 * np.arange(moments)
    nodes = np.arange(1, moments + 1) - 0.5
    rhs = np.array([half_zeta(b - kk) for kk in k])
    return np.linalg.solve(nodes[None, :] ** k[:, None], rhs)


def _correct_origin(grid: Grid, b: float, samples: np.ndarray) -> np.ndarray:
    h = grid.spacing
    c = grid.n_points // 2
    values = samples.copy()
    if grid.dim == 1:
        for i, a in enumerate(origin_stencil(b, min(ORIGIN_MOMENTS, c))):
            values[c - 1 - i] -= a * h ** -b
            values[c + i] -= a * h ** -b
    else:
        # leading order: the lattice constant spread over the 2^dim cells touching the origin
        corner = tuple(slice(c - 1, c + 1) for _ in range(grid.dim))
        values[corner] -= lattice_zeta(grid.dim, b) * h ** -b / 2.0 ** grid.dim
    if values.min() <= 0:
        raise ParameterOutOfRange(f"origin correction for b={b} makes the weight non-positive on this grid")
    return values


def make_weight(grid: Grid, b: float, eps_reg: float = None, corrected: bool = True) -> WeightField:
    """Weight (|x|²+eps_reg²)^{-b/2}; with eps_reg = 0 the cells at the origin carry the singular-quadrature correction."""
    if not b > 0:
        raise ParameterOutOfRange(f"weight exponent b > 0 required, got {b}")
    if eps_reg is None:
        eps_reg = 0.5 * grid.spacing
    if eps_reg < 0:
        raise ParameterOutOfRange(f"eps_reg >= 0 required, got {eps_reg}")
    if eps_reg == 0 and grid.contains_origin:
        raise SingularOrigin("eps_reg = 0 needs a shifted grid: the origin is a grid point")
    r2 = grid.radius ** 2
    samples = (r2 + eps_reg ** 2) ** (-0.5 * b)
    if eps_reg == 0 and corrected and b < grid.dim:
        return WeightField(grid, float(b), 0.0, _correct_origin(grid, b, samples), samples, True)
    return WeightField(grid, float(b), float(eps_reg), samples)


def check_weight(f: Field, w: WeightField, b: float = None):
    check_same_grid(f.grid, w.grid)
    if b is not None and not np.isclose(b, w.b, rtol=0, atol=1e-14):
        raise GridMismatch(f"weight exponent {w.b} does not match b={b}")


# ================================
# Coordinate dilation
# ================================

def dilate(f: Field, scale: float, amplitude: float = 1.0, tol: float = 1e-8, block: int = 512) -> Field:
    """Return amplitude·f(scale·x) by trigonometric interpolation, axis by axis."""
    if not scale > 0:
        raise ResolutionLoss(f"dilation scale must be positive, got {scale}")
    grid = f.grid
    u = f.physical().values
    if scale == 1.0:
        return Field(grid, amplitude * u, PHYSICAL)

    dens = np.abs(u) ** 2
    total = dens.sum()
    if total == 0:
        return Field.zeros(grid)
    if scale < 1.0:
        lost = dens[grid.sup_coord >= scale * grid.half_width].sum() / total
        if lost > tol:
            raise ResolutionLoss(
                f"dilation by {scale:.4g} pushes {lost:.2e} of the mass beyond the box"
            )
    else:
        power = np.abs(fft(u)) ** 2
        kmax = np.pi / grid.spacing
        beyond = np.zeros(grid.shape, dtype=bool)
        for k in grid.wavenumbers:
            beyond = beyond | (np.abs(k) > kmax / scale)
        tail = power[beyond].sum() / power.sum()
        if tail > tol:
            raise ResolutionLoss(
                f"dilation by {scale:.4g} leaves {tail:.2e} of the spectrum beyond the grid resolution"
            )

    x0 = grid.axis[0]
    y = scale * grid.axis
    k = grid.axis_wavenumbers
    nyq = grid.n_points // 2
    out = u.astype(complex)
    for axis in range(grid.dim):
        coeffs = np.moveaxis(sfft.fft(out, axis=axis), axis, 0)
        flat = coeffs.reshape(grid.n_points, -1)
        result = np.empty_like(flat)
        for start in range(0, grid.n_points, block):
            yy = y[start:start + block, None] - x0
            basis = np.exp(1j * yy * k[None, :])
            basis[:, nyq] = np.cos(yy[:, 0] * k[nyq])
            result[start:start + block] = basis @ flat / grid.n_points
        out = np.moveaxis(result.reshape(coeffs.shape), 0, axis)
    return Field(grid, amplitude * out, PHYSICAL)
