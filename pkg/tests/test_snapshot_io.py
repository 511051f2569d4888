import json
import os

import numpy as np
import pytest

from IBNLSLab.core.grid import Field, make_grid
from IBNLSLab.data.snapshot_io import SnapshotStore, encode_field, decode_field, save_checkpoint, load_checkpoint
from IBNLSLab.errors import CorruptSnapshot, ConfigHashMismatch
from IBNLSLab.models.records import EvolveState


@pytest.fixture
def field():
    grid = make_grid(2, 16, 4.0, shift=True)
    rng = np.random.default_rng(5)
    return Field(grid, rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape))


def test_store_round_trip_is_exact(tmp_path, field):
    store = SnapshotStore(str(tmp_path))
    path = store.save(field, "u.bin")
    assert os.path.getsize(path) == len(encode_field(field))
    loaded = store.load("u.bin")
    assert loaded.grid == field.grid
    assert loaded.space == field.space
    assert np.array_equal(loaded.values, field.values)


def test_spectral_flag_survives(field):
    assert decode_field(encode_field(field.spectral())).space == field.spectral().space


def test_missing_snapshot(tmp_path):
    with pytest.raises(FileNotFoundError):
        SnapshotStore(str(tmp_path)).load("absent.bin")


def test_truncated_snapshot(field):
    blob = encode_field(field)
    with pytest.raises(CorruptSnapshot):
        decode_field(blob[:-10])
    with pytest.raises(CorruptSnapshot):
        decode_field(blob[:8])


def test_bad_magic_and_checksum(field):
    blob = bytearray(encode_field(field))
    bad_magic = bytes(b"XXXXXX" + blob[6:])
    with pytest.raises(CorruptSnapshot):
        decode_field(bad_magic)
    blob[100] ^= 0xFF
    with pytest.raises(CorruptSnapshot, match="checksum"):
        decode_field(bytes(blob))


def _state(field):
    return EvolveState(
        field=field, step=100, t=0.1, dt=1e-3, mass0=1.25, energy0=-0.5, accumulated_potential=0.03,
        mass_drift_max=1e-14, energy_drift_max=2e-9, h2_initial=3.0, potential_last=0.4,
    )


def test_checkpoint_round_trip(tmp_path, field):
    section = {"params": {"d": 2, "b": 0.5}, "dt": 1e-3}
    bin_path, json_path = save_checkpoint(str(tmp_path), _state(field), section)
    loaded, sidecar = load_checkpoint(bin_path, section)
    assert np.array_equal(loaded.values, field.values)
    assert sidecar["step"] == 100
    assert sidecar["energy_drift_max"] == 2e-9
    assert sidecar["config"] == section


def test_checkpoint_from_other_config(tmp_path, field):
    section = {"params": {"d": 2, "b": 0.5}, "dt": 1e-3}
    bin_path, _ = save_checkpoint(str(tmp_path), _state(field), section)
    with pytest.raises(ConfigHashMismatch):
        load_checkpoint(bin_path, {"params": {"d": 2, "b": 0.5}, "dt": 5e-4})


def test_edited_sidecar_is_rejected(tmp_path, field):
    section = {"params": {"d": 2, "b": 0.5}, "dt": 1e-3}
    bin_path, json_path = save_checkpoint(str(tmp_path), _state(field), section)
    with open(json_path) as fh:
        sidecar = json.load(fh)
    sidecar["config"]["dt"] = 2e-3
    with open(json_path, "w") as fh:
        json.dump(sidecar, fh)
    with pytest.raises(ConfigHashMismatch):
        load_checkpoint(bin_path)


def test_missing_sidecar(tmp_path, field):
    bin_path, json_path = save_checkpoint(str(tmp_path), _state(field), {})
    os.remove(json_path)
    with pytest.raises(FileNotFoundError):
        load_checkpoint(bin_path)
