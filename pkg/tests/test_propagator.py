import numpy as np
import pytest

from IBNLSLab.core.grid import Field, make_grid, SPECTRAL
from IBNLSLab.core.propagator import make_symbol, linear_evolve, group_property_check, dispersive_decay_fit
from IBNLSLab.errors import WraparoundDetected, GridMismatch


def gaussian(grid, width=1.0):
    return Field.from_function(grid, lambda *xs: np.exp(-sum(x * x for x in xs) / (2.0 * width ** 2)))


def test_linear_flow_is_unitary_and_a_group():
    grid = make_grid(1, 512, 32.0)
    sym = make_symbol(grid, 1.0)
    f = gaussian(grid)
    u = linear_evolve(f, 0.7, sym)
    assert u.l2() == pytest.approx(f.l2(), rel=1e-13)
    assert group_property_check(f, 0.3, 0.4, sym) < 1e-12
    back = linear_evolve(u, -0.7, sym)
    assert np.allclose(back.values, f.values, atol=1e-12)


def test_spectral_input_stays_spectral():
    grid = make_grid(2, 32, 8.0)
    sym = make_symbol(grid, 0.0)
    fhat = gaussian(grid).spectral()
    out = linear_evolve(fhat, 0.1, sym)
    assert out.space == SPECTRAL
    assert np.allclose(np.abs(out.values), np.abs(fhat.values))


def test_symbol_rates():
    grid = make_grid(1, 64, 8.0)
    sym = make_symbol(grid, 2.0)
    k2 = grid.ksq
    assert np.allclose(sym.table, k2 ** 2 + 2.0 * k2)
    assert sym.max_rate == pytest.approx(float((k2 ** 2 + 2.0 * k2).max()))


def test_symbol_grid_must_match():
    sym = make_symbol(make_grid(1, 64, 8.0), 0.0)
    with pytest.raises(GridMismatch):
        linear_evolve(gaussian(make_grid(1, 128, 8.0)), 0.1, sym)


@pytest.mark.slow
def test_dispersive_decay_rate_1d():
    grid = make_grid(1, 131072, 16384.0)
    sym = make_symbol(grid, 0.0)
    fit = dispersive_decay_fit(gaussian(grid), np.geomspace(4.0, 40.0, 8), sym)
    # ‖U(t)f‖_∞ ~ t^{-d/4}
    assert fit["slope"] == pytest.approx(-0.25, abs=0.05)
    assert fit["r2"] > 0.95


def test_dispersive_decay_rate_short_window():
    grid = make_grid(1, 16384, 2048.0)
    sym = make_symbol(grid, 0.0)
    fit = dispersive_decay_fit(gaussian(grid), np.geomspace(2.0, 8.0, 5), sym)
    assert fit["slope"] == pytest.approx(-0.25, abs=0.08)


def test_wraparound_is_detected():
    grid = make_grid(1, 256, 8.0)
    sym = make_symbol(grid, 0.0)
    with pytest.raises(WraparoundDetected):
        dispersive_decay_fit(gaussian(grid), [1.0, 10.0, 100.0], sym)


def test_decay_fit_needs_positive_times():
    grid = make_grid(1, 64, 8.0)
    with pytest.raises(ValueError):
        dispersive_decay_fit(gaussian(grid), [0.0, 1.0], make_symbol(grid, 0.0))


def test_group_property_at_long_times():
    grid = make_grid(1, 512, 32.0)
    sym = make_symbol(grid, 1.0)
    assert group_property_check(gaussian(grid), 1e3, 1e3, sym) < 1e-10


def test_single_mode_only_picks_up_a_phase():
    grid = make_grid(1, 64, 8.0)
    mu, t = 1.5, 0.37
    k0 = grid.axis_wavenumbers[3]
    f = Field.from_function(grid, lambda x: np.exp(1j * k0 * x))
    assert np.count_nonzero(np.abs(f.spectral().values) > 1e-10) == 1
    out = linear_evolve(f, t, make_symbol(grid, mu))
    expected = np.exp(-1j * (k0 ** 4 + mu * k0 ** 2) * t) * f.values
    assert np.allclose(out.values, expected, atol=1e-12)
