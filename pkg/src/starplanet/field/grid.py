"""Uniform cubic-cell grids and the GPD1 density snapshot format."""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"GPD1"
_HEADER = struct.Struct("<4s3I4d")


class SnapshotFormatError(ValueError):
    """Raised for a snapshot with the wrong magic bytes or a short payload."""


@dataclass
class GridDensity:
    """Non-negative density sampled at the centers of cubic cells.

    ``values[i, j, k]`` lives at ``origin + h * (i, j, k)``.
    """

    values: np.ndarray
    h: float
    origin: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.origin = np.asarray(self.origin, dtype=float).reshape(3)
        if self.values.ndim != 3 or min(self.values.shape) < 1:
            raise ValueError("values must be a non-empty 3D array")
        if not self.h > 0:
            raise ValueError("spacing must be positive")
        if not np.all(np.isfinite(self.values)) or np.any(self.values < 0):
            raise ValueError("density values must be finite and non-negative")

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(int(n) for n in self.values.shape)

    @property
    def cell_volume(self) -> float:
        return self.h**3

    @property
    def mass(self) -> float:
        return float(self.values.sum() * self.h**3)

    def axes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return tuple(self.origin[a] + self.h * np.arange(n) for a, n in enumerate(self.dims))

    def coords(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable cell-center coordinate arrays (x, y, z)."""
        x, y, z = self.axes()
        return x[:, None, None], y[None, :, None], z[None, None, :]

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Lower and upper corners of the box covered by the cells."""
        lo = self.origin - 0.5 * self.h
        return lo, lo + self.h * np.asarray(self.dims)

    def center(self) -> np.ndarray:
        lo, hi = self.bounds()
        return 0.5 * (lo + hi)

    def with_values(self, values: np.ndarray) -> "GridDensity":
        return GridDensity(values, self.h, self.origin.copy())

    def translated(self, shift) -> "GridDensity":
        return GridDensity(self.values.copy(), self.h, self.origin + np.asarray(shift, float))

    def copy(self) -> "GridDensity":
        return GridDensity(self.values.copy(), self.h, self.origin.copy())


@dataclass
class GridField:
    """Signed field on the same geometry as a density (potentials, Phi)."""

    values: np.ndarray
    h: float
    origin: np.ndarray

    @classmethod
    def like(cls, rho: GridDensity, values: np.ndarray) -> "GridField":
        return cls(np.asarray(values, float), rho.h, rho.origin.copy())


def make_grid(center, half_width: float, cells: int) -> tuple[float, np.ndarray]:
    """Spacing and origin of a ``cells``**3 grid centered at ``center``."""
    if cells < 2:
        raise ValueError("need at least two cells per axis")
    h = 2.0 * half_width / cells
    origin = np.asarray(center, float) - half_width + 0.5 * h
    return h, origin


def write_snapshot(path: str | Path, rho: GridDensity) -> None:
    nx, ny, nz = rho.dims
    header = _HEADER.pack(MAGIC, nx, ny, nz, rho.h, *rho.origin)
    payload = np.asarray(rho.values, dtype="<f8").ravel(order="F").tobytes()
    Path(path).write_bytes(header + payload)


def read_snapshot(path: str | Path) -> GridDensity:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise SnapshotFormatError("truncated header")
    magic, nx, ny, nz, h, ox, oy, oz = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise SnapshotFormatError(f"bad magic {magic!r}")
    count = nx * ny * nz
    body = data[_HEADER.size:]
    if len(body) != 8 * count:
        raise SnapshotFormatError(f"payload has {len(body)} bytes, expected {8 * count}")
    values = np.frombuffer(body, dtype="<f8").reshape((nx, ny, nz), order="F")
    return GridDensity(values.astype(float), h, np.array([ox, oy, oz]))
