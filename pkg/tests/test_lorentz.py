import math

import numpy as np
import pytest

from IBNLSLab.core.grid import Field, make_grid, make_weight
from IBNLSLab.core.lorentz import (
    decreasing_rearrangement, lorentz_norm, lorentz_norm_star, lk_lr2_series, lk_lr2_accumulate, RIGHT,
)
from IBNLSLab.errors import InvalidExponent, EmptySeries, SpaceMismatch


def gaussian(grid, amplitude=1.0):
    return Field.from_function(grid, lambda *xs: amplitude * np.exp(-sum(x * x for x in xs) / 2.0))


def lebesgue(f, r):
    return float((f.grid.cell_volume * np.sum(np.abs(f.values) ** r)) ** (1.0 / r))


@pytest.mark.parametrize("r", [1.5, 2.0, 4.0, 13.0])
def test_diagonal_lorentz_norm_is_lebesgue(r):
    grid = make_grid(2, 64, 8.0)
    f = gaussian(grid)
    assert lorentz_norm(f, r, r) == pytest.approx(lebesgue(f, r), rel=1e-10)


def test_weight_weak_norm_matches_unit_ball():
    b = 0.25
    errors = []
    for n in (512, 1024, 2048, 4096):
        grid = make_grid(1, n, 8.0, shift=True)
        w = make_weight(grid, b, 0.0)
        value = lorentz_norm(Field(grid, w.samples.astype(complex)), 1.0 / b, math.inf)
        errors.append(abs(value / 2.0 ** b - 1.0))
    assert errors[-1] <= 0.02
    assert all(later <= earlier + 1e-12 for earlier, later in zip(errors, errors[1:]))


def test_right_endpoint_rule_overestimates_plateaus():
    grid = make_grid(1, 1024, 8.0, shift=True)
    w = make_weight(grid, 0.25, 0.0)
    f = Field(grid, w.samples.astype(complex))
    assert lorentz_norm(f, 4.0, math.inf, sup_rule=RIGHT) >= lorentz_norm(f, 4.0, math.inf)


def test_rearrangement_is_decreasing_and_equimeasurable():
    grid = make_grid(1, 256, 8.0)
    rng = np.random.default_rng(3)
    f = Field(grid, rng.standard_normal(256) + 1j * rng.standard_normal(256))
    prof = decreasing_rearrangement(f)
    assert np.all(np.diff(prof.sorted_values) <= 0)
    assert np.all(np.diff(prof.f_star) <= 0)
    assert prof.total_measure == pytest.approx(16.0)
    assert np.sum(prof.sorted_values ** 2) == pytest.approx(np.sum(np.abs(f.values) ** 2))


def test_scaling_and_nesting():
    grid = make_grid(1, 512, 16.0)
    rng = np.random.default_rng(11)
    fields = []
    for _ in range(6):
        c, s = rng.uniform(-4, 4), rng.uniform(0.5, 2.0)
        fields.append(Field.from_function(grid, lambda x, c=c, s=s: np.exp(-(x - c) ** 2 / (2 * s * s))))
    f = fields[0]
    assert lorentz_norm(f.scaled(3.0), 4.0, 2.0) == pytest.approx(3.0 * lorentz_norm(f, 4.0, 2.0), rel=1e-12)
    ratios = [lorentz_norm(g, 4.0, math.inf) / lorentz_norm(g, 4.0, 2.0) for g in fields]
    assert max(ratios) <= 1.5 * ratios[0]


def test_normable_variant_is_equivalent():
    grid = make_grid(1, 512, 16.0)
    f = gaussian(grid)
    r = 4.0
    for rho in (2.0, 4.0, math.inf):
        quasi = lorentz_norm(f, r, rho)
        star = lorentz_norm_star(f, r, rho)
        # f* ≤ f** ≤ r' f* in norm
        assert quasi <= star * (1.0 + 1e-9)
        assert star <= r / (r - 1.0) * quasi * (1.0 + 1e-6)


def test_exponent_validation_and_space():
    grid = make_grid(1, 64, 8.0)
    f = gaussian(grid)
    with pytest.raises(InvalidExponent):
        lorentz_norm(f, 1.0, 2.0)
    with pytest.raises(InvalidExponent):
        lorentz_norm(f, 2.0, 0.5)
    with pytest.raises(SpaceMismatch):
        lorentz_norm(f.spectral(), 2.0, 2.0)
    assert lorentz_norm(Field.zeros(grid), 2.0, 2.0) == 0.0


def test_time_accumulation_left_endpoint():
    grid = make_grid(1, 128, 8.0)
    f = gaussian(grid)
    series = [(0.0, f), (1.0, f), (3.0, f)]
    n = lorentz_norm(f, 4.0, 2.0)
    running = lk_lr2_series(series, 2.0, 4.0)
    assert running[0] == pytest.approx(n)
    assert running[-1] == pytest.approx(math.sqrt(3.0) * n)
    assert lk_lr2_accumulate(series, 2.0, 4.0, t_end=4.0) == pytest.approx(2.0 * n)


def test_time_accumulation_errors():
    grid = make_grid(1, 64, 8.0)
    f = gaussian(grid)
    with pytest.raises(EmptySeries):
        lk_lr2_series([], 2.0, 4.0)
    with pytest.raises(ValueError):
        lk_lr2_series([(1.0, f), (0.5, f)], 2.0, 4.0)
    with pytest.raises(ValueError):
        lk_lr2_series([(0.0, f), (1.0, f)], 2.0, 4.0, t_end=0.5)


@pytest.mark.parametrize("theta", [0.75, 2.0])
@pytest.mark.parametrize("rho", [2.0, math.inf])
def test_power_identity(theta, rho):
    grid = make_grid(2, 64, 8.0)
    f = gaussian(grid)
    rng = np.random.default_rng(5)
    f = Field(grid, f.values * (1.0 + 0.3 * rng.standard_normal(grid.shape)))
    r = 4.0
    powered = Field(grid, np.abs(f.values) ** theta + 0j)
    assert lorentz_norm(powered, r, rho) == pytest.approx(lorentz_norm(f, theta * r, theta * rho) ** theta, rel=1e-9)


def test_indicator_norm_is_measure_power():
    grid = make_grid(1, 256, 8.0)
    inside = np.abs(grid.axis) < 2.0
    f = Field(grid, inside.astype(complex))
    m = inside.sum() * grid.cell_volume
    prof = decreasing_rearrangement(f)
    assert np.all(prof.f_star_at(np.array([0.0, 0.5 * m, m * (1.0 - 1e-9)])) == 1.0)
    assert np.all(prof.f_star_at(np.array([m, m + 1.0])) == 0.0)
    for rho in (1.0, 2.0, 5.0):
        assert lorentz_norm(f, 3.0, rho) == pytest.approx(m ** (1.0 / 3.0), rel=1e-12)
    assert lorentz_norm(f, 3.0, math.inf, sup_rule=RIGHT) == pytest.approx(m ** (1.0 / 3.0), rel=1e-12)
    # a single plateau is read at its centre
    assert lorentz_norm(f, 3.0, math.inf) == pytest.approx((0.5 * m) ** (1.0 / 3.0), rel=1e-12)


def test_gaussian_rearrangement_matches_closed_form():
    # |{e^{-x²/2} > λ}| = 2x, so f*(s) = e^{-s²/8}
    grid = make_grid(1, 1024, 16.0)
    prof = decreasing_rearrangement(gaussian(grid))
    exact = np.exp(-prof.s_samples ** 2 / 8.0)
    assert np.max(np.abs(prof.f_star - exact)) < 0.5 * grid.spacing


def test_rearrangement_ignores_sample_order():
    grid = make_grid(2, 32, 8.0)
    rng = np.random.default_rng(9)
    f = Field(grid, rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape))
    shuffled = Field(grid, rng.permutation(f.values.ravel()).reshape(grid.shape))
    a, b = decreasing_rearrangement(f), decreasing_rearrangement(shuffled)
    assert np.array_equal(a.sorted_values, b.sorted_values)
    assert np.array_equal(a.f_star, b.f_star)
    assert np.array_equal(a.distribution, b.distribution)
    assert lorentz_norm(f, 4.0, 2.0) == lorentz_norm(shuffled, 4.0, 2.0)
