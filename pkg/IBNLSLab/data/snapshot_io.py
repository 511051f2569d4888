import hashlib
import json
import logging
import os
import struct
import zlib
from dataclasses import fields
from typing import Tuple

import numpy as np

from IBNLSLab.core.grid import Field, Grid, PHYSICAL, SPECTRAL
from IBNLSLab.errors import CorruptSnapshot, ConfigHashMismatch

MAGIC = b"IBNLS1"
FLAG_SPECTRAL = 0x1
FLAG_SHIFT = 0x2
# magic | header length | dim | n_points | half_width | flags | payload length
_HEADER = struct.Struct("<6sQQQdBQ")


class SnapshotStore:
    """Binary field snapshots: fixed header, interleaved little-endian (re, im) float64, CRC32 trailer."""

    def __init__(self, root: str = "."):
        self.root = root
        self.logger = logging.getLogger("ibnls.io")

    def path(self, name: str) -> str:
        return os.path.join(self.root, name)

    def save(self, f: Field, name: str) -> str:
        path = self.path(name)
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        with open(path, "wb") as fh:
            fh.write(encode_field(f))
        self.logger.debug(f"📨 Snapshot written: {path}")
        return path

    def load(self, name: str) -> Field:
        path = self.path(name)
        if not os.path.exists(path):
            raise FileNotFoundError(f"Snapshot not found: {path}")
        with open(path, "rb") as fh:
            return decode_field(fh.read())


def encode_field(f: Field) -> bytes:
    g = f.grid
    flags = (FLAG_SPECTRAL if f.space == SPECTRAL else 0) | (FLAG_SHIFT if g.shift else 0)
    payload = np.ascontiguousarray(f.values, dtype="<c16").tobytes(order="C")
    header = _HEADER.pack(MAGIC, _HEADER.size, g.dim, g.n_points, g.half_width, flags, len(payload))
    return header + payload + zlib.crc32(payload).to_bytes(4, "little")


def decode_field(blob: bytes) -> Field:
    if len(blob) < _HEADER.size:
        raise CorruptSnapshot(f"snapshot truncated: {len(blob)} bytes is shorter than the header")
    magic, header_len, dim, n_points, half_width, flags, payload_len = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise CorruptSnapshot(f"bad magic {magic!r}")
    if header_len != _HEADER.size:
        raise CorruptSnapshot(f"unexpected header length {header_len}")
    expected = 16 * n_points ** dim
    if payload_len != expected:
        raise CorruptSnapshot(f"payload length {payload_len} does not match grid ({expected} bytes)")
    if len(blob) != _HEADER.size + payload_len + 4:
        raise CorruptSnapshot(f"snapshot truncated: {len(blob)} of {_HEADER.size + payload_len + 4} bytes")

    payload = blob[_HEADER.size:_HEADER.size + payload_len]
    crc = int.from_bytes(blob[_HEADER.size + payload_len:], "little")
    if zlib.crc32(payload) != crc:
        raise CorruptSnapshot("checksum mismatch")

    grid = Grid(int(dim), int(n_points), float(half_width), bool(flags & FLAG_SHIFT))
    values = np.frombuffer(payload, dtype="<c16").astype(complex).reshape(grid.shape)
    space = SPECTRAL if flags & FLAG_SPECTRAL else PHYSICAL
    return Field(grid, values, space)


# ================================
# Checkpoint = snapshot + JSON sidecar
# ================================

def digest(payload: dict) -> str:
    """SHA-256 of the canonical JSON form of `payload`."""
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=float)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def save_checkpoint(directory: str, state, config_section: dict, stem: str = "checkpoint") -> Tuple[str, str]:
    """Write the evolve state's field and its sidecar; returns both paths."""
    store = SnapshotStore(directory)
    bin_path = store.save(state.field, f"{stem}.bin")
    sidecar = {f.name: getattr(state, f.name) for f in fields(state) if f.name != "field"}
    sidecar["config"] = config_section
    sidecar["config_hash"] = digest(config_section)
    json_path = os.path.join(directory, f"{stem}.json")
    with open(json_path, "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
    return bin_path, json_path


def load_checkpoint(bin_path: str, config_section: dict = None):
    """Return (field, sidecar dict).

    The sidecar must hash to its own stored digest and, when `config_section` is given, must have
    been written by the same configuration.
    """
    json_path = os.path.splitext(bin_path)[0] + ".json"
    if not os.path.exists(bin_path):
        raise FileNotFoundError(f"Checkpoint not found: {bin_path}")
    if not os.path.exists(json_path):
        raise FileNotFoundError(f"Checkpoint sidecar not found: {json_path}")
    with open(json_path, "r") as fh:
        sidecar = json.load(fh)

    stored = sidecar.get("config_hash")
    if digest(sidecar.get("config", {})) != stored:
        raise ConfigHashMismatch("checkpoint sidecar was edited: its config no longer matches its hash")
    if config_section is not None and digest(config_section) != stored:
        raise ConfigHashMismatch(f"checkpoint was written by config {str(stored)[:12]}, current config differs")

    with open(bin_path, "rb") as fh:
        field = decode_field(fh.read())
    return field, sidecar
