import numpy as np
import pytest

from IBNLSLab.core.grid import Field, make_grid
from IBNLSLab.core.initial_data import ring_data, random_smooth_field, load_field
from IBNLSLab.data.snapshot_io import SnapshotStore
from IBNLSLab.errors import GridMismatch


def test_ring_peaks_on_its_radius():
    grid = make_grid(2, 128, 16.0)
    f = ring_data(grid, amplitude=2.0, width=0.5, radius=5.0)
    peak = np.unravel_index(np.argmax(np.abs(f.values)), grid.shape)
    assert abs(grid.radius[peak] - 5.0) <= grid.spacing
    assert np.abs(f.values).max() == pytest.approx(2.0, rel=1e-2)


def test_random_fields_follow_the_seed():
    grid = make_grid(1, 512, 32.0)
    a = random_smooth_field(grid, np.random.default_rng(4), modes=3)
    b = random_smooth_field(grid, np.random.default_rng(4), modes=3)
    c = random_smooth_field(grid, np.random.default_rng(5), modes=3)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)
    assert np.abs(a.values[np.abs(grid.axis) > 24.0]).max() < 1e-6


def test_load_field_checks_the_grid(tmp_path):
    grid = make_grid(1, 64, 8.0)
    path = SnapshotStore(str(tmp_path)).save(Field.zeros(grid), "u.bin")
    assert load_field(path, grid).grid == grid
    with pytest.raises(GridMismatch):
        load_field(path, make_grid(1, 128, 8.0))
