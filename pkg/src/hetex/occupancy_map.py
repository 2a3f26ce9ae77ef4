"""Explored (belief) map shared by both UAVs.

Both UAVs integrate into the same grid: with ground-truth localisation the
sUAV frame coincides with the global frame, so merging is just integration.
"""
from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from hetex import _kernels
from hetex.errors import DomainError
from hetex.voxel_world import CellState, Scan, VoxelGrid


class UavId(enum.IntFlag):
    PUAV = 1
    SUAV = 2

    @classmethod
    def parse(cls, name: str) -> "UavId":
        return {"pUAV": cls.PUAV, "sUAV": cls.SUAV}[name]

    @property
    def label(self) -> str:
        return "pUAV" if self is UavId.PUAV else "sUAV"


@dataclass
class ExploredMap:
    grid: VoxelGrid
    explore_lo: np.ndarray
    explore_hi: np.ndarray
    observed_by: np.ndarray = field(repr=False)
    version: int = 0

    @classmethod
    def empty_like(cls, truth: VoxelGrid, explore_lo=None, explore_hi=None) -> "ExploredMap":
        grid = VoxelGrid.filled(truth.origin, truth.resolution, truth.dims, CellState.UNKNOWN)
        lo = truth.origin if explore_lo is None else np.asarray(explore_lo, float)
        hi = truth.upper if explore_hi is None else np.asarray(explore_hi, float)
        return cls(grid, np.asarray(lo, float), np.asarray(hi, float),
                   np.zeros(truth.dims, dtype=np.uint8))

    @classmethod
    def from_truth(cls, truth: VoxelGrid, who: UavId = UavId.PUAV) -> "ExploredMap":
        """A fully known map; handy for planning tests."""
        m = cls.empty_like(truth)
        m.grid.cells[:] = truth.cells
        m.observed_by[:] = int(who)
        m.version = 1
        return m

    @property
    def cells(self) -> np.ndarray:
        return self.grid.cells

    def explore_mask(self) -> np.ndarray:
        return self.grid.box_mask(self.explore_lo, self.explore_hi)

    def snapshot(self) -> "ExploredMap":
        return ExploredMap(self.grid.copy(), self.explore_lo.copy(), self.explore_hi.copy(),
                           self.observed_by.copy(), self.version)


def integrate_scan(m: ExploredMap, scan: Scan, who: UavId) -> ExploredMap:
    """Mark traversed cells Free and hit cells Occupied (in place)."""
    if not m.grid.in_bounds(scan.position):
        raise DomainError("scan origin outside map")
    _kernels.integrate_many(m.grid.cells, m.observed_by, m.grid.origin, m.grid.resolution,
                            scan.position, scan.directions, scan.ranges, scan.hit, int(who))
    m.version += 1
    return m


def explored_fraction(m: ExploredMap) -> float:
    mask = m.explore_mask()
    total = int(mask.sum())
    if total == 0:
        raise DomainError("explore bounds contain no cells")
    known = int(np.count_nonzero(m.cells[mask] != CellState.UNKNOWN))
    return known / total


def state_at(m: ExploredMap, p) -> CellState:
    return m.grid.state(p)


# Map dump layout (little endian):
#   magic b"HXMAP1\0\0", dims 3*uint32, resolution float64, origin 3*float64,
#   then dims product uint8 cell states (C order: x slowest, z fastest),
#   then the same number of uint8 observed_by bitmasks (1 = pUAV, 2 = sUAV).
_MAGIC = b"HXMAP1\0\0"
_HEADER = struct.Struct("<8s3Id3d")


def export_map(m: ExploredMap, path) -> None:
    g = m.grid
    header = _HEADER.pack(_MAGIC, *g.dims, g.resolution, *g.origin)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(g.cells, dtype=np.uint8).tobytes())
        fh.write(np.ascontiguousarray(m.observed_by, dtype=np.uint8).tobytes())


def import_map(path) -> ExploredMap:
    data = Path(path).read_bytes()
    magic, nx, ny, nz, res, ox, oy, oz = _HEADER.unpack_from(data)
    if magic != _MAGIC:
        raise ValueError("not a map dump")
    n = nx * ny * nz
    off = _HEADER.size
    cells = np.frombuffer(data, np.uint8, n, off).reshape(nx, ny, nz).copy()
    obs = np.frombuffer(data, np.uint8, n, off + n).reshape(nx, ny, nz).copy()
    grid = VoxelGrid(np.array([ox, oy, oz]), res, (nx, ny, nz), cells)
    return ExploredMap(grid, grid.origin.copy(), grid.upper.copy(), obs)
