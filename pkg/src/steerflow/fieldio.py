"""Binary field dumps and PPM frame dumps.

Field dump layout: magic "STLB", u32 little-endian version (1), u32 nx,
u32 ny, u32 field id, then nx*ny float64 little-endian values, row-major
with y as the outer index.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"STLB"
VERSION = 1

FIELD_RHO = 0
FIELD_UX = 1
FIELD_UY = 2
FIELD_TEMP = 3

FIELD_NAMES = {FIELD_RHO: "rho", FIELD_UX: "ux", FIELD_UY: "uy", FIELD_TEMP: "temp"}
FIELD_IDS = {v: k for k, v in FIELD_NAMES.items()}


def write_dump(path: str | Path, field: np.ndarray, field_id: int) -> None:
    ny, nx = field.shape
    header = MAGIC + struct.pack("<III", VERSION, nx, ny) + struct.pack("<I", field_id)
    data = np.ascontiguousarray(field, dtype="<f8").tobytes()
    Path(path).write_bytes(header + data)


def read_dump(path: str | Path) -> tuple[int, np.ndarray]:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise ValueError(f"{path}: bad magic {raw[:4]!r}")
    version, nx, ny, field_id = struct.unpack("<IIII", raw[4:20])
    if version != VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    data = np.frombuffer(raw[20:], dtype="<f8", count=nx * ny)
    return field_id, data.reshape(ny, nx).copy()


def write_ppm(path: str | Path, rgba: np.ndarray) -> None:
    """Binary P6 dump of an (h, w, 4) RGBA8 buffer (alpha dropped)."""
    h, w = rgba.shape[:2]
    header = f"P6\n{w} {h}\n255\n".encode()
    Path(path).write_bytes(header + np.ascontiguousarray(rgba[:, :, :3]).tobytes())
