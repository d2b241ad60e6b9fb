"""Binary field snapshots.

Layout (little-endian): ``b"NLSF"``, u32 dim, u64 N, f64 L, then N
interleaved (re, im) float64 pairs.
"""

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grid import Grid, make_grid

MAGIC = b"NLSF"
_HEADER = struct.Struct("<4sIQd")


@dataclass(frozen=True, eq=False)
class ComplexField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.grid.check(self.values)


def encode(grid: Grid, u) -> bytes:
    grid.check(u)
    body = np.ascontiguousarray(u, dtype="<c16").tobytes()
    return _HEADER.pack(MAGIC, grid.dim, grid.N, grid.L) + body


def decode(data: bytes) -> ComplexField:
    if len(data) < _HEADER.size:
        raise ValueError("truncated snapshot header")
    magic, dim, N, L = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ValueError(f"bad magic {magic!r}, expected {MAGIC!r}")
    body = data[_HEADER.size:]
    if len(body) != 16 * N:
        raise ValueError(f"snapshot body holds {len(body)} bytes, expected {16 * N}")
    values = np.frombuffer(body, dtype="<c16").astype(complex)
    return ComplexField(make_grid(dim, L, N), values)


def write_snapshot(path, grid: Grid, u) -> Path:
    Path(path).write_bytes(encode(grid, u))
    return Path(path)


def read_snapshot(path) -> ComplexField:
    return decode(Path(path).read_bytes())
