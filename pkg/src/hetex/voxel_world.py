"""Ground-truth voxel world and sensor simulation."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from hetex import _kernels
from hetex.errors import BoundsError, DomainError


class CellState(enum.IntEnum):
    UNKNOWN = _kernels.UNKNOWN
    FREE = _kernels.FREE
    OCCUPIED = _kernels.OCCUPIED


class SensorKind(str, enum.Enum):
    OMNI3D = "omni3d"
    CONE = "cone"


class Termination(str, enum.Enum):
    OBSTACLE = "obstacle"
    MAX_RANGE = "max_range"


@dataclass
class VoxelGrid:
    """Dense uniform grid; ``cells[ix, iy, iz]`` holds a :class:`CellState`."""

    origin: np.ndarray
    resolution: float
    dims: tuple[int, int, int]
    cells: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        self.origin = np.asarray(self.origin, dtype=float)
        self.dims = tuple(int(d) for d in self.dims)
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        if any(d < 1 for d in self.dims):
            raise ValueError("dims must all be >= 1")
        if self.cells.shape != self.dims:
            raise ValueError(f"cells shape {self.cells.shape} != dims {self.dims}")

    @classmethod
    def filled(cls, origin, resolution: float, dims, state: CellState) -> "VoxelGrid":
        cells = np.full(tuple(dims), int(state), dtype=np.uint8)
        return cls(np.asarray(origin, float), float(resolution), tuple(dims), cells)

    @property
    def upper(self) -> np.ndarray:
        return self.origin + np.asarray(self.dims) * self.resolution

    def in_bounds(self, p) -> bool:
        p = np.asarray(p, dtype=float)
        return bool(np.all(p >= self.origin) and np.all(p < self.upper))

    def world_to_cell(self, p) -> tuple[int, int, int]:
        if not self.in_bounds(p):
            raise DomainError(f"point {tuple(np.round(p, 6))} outside grid")
        idx = np.floor((np.asarray(p, float) - self.origin) / self.resolution).astype(int)
        idx = np.minimum(idx, np.asarray(self.dims) - 1)
        return int(idx[0]), int(idx[1]), int(idx[2])

    def cell_center(self, idx) -> np.ndarray:
        return self.origin + (np.asarray(idx, dtype=float) + 0.5) * self.resolution

    def centers(self, idx: np.ndarray) -> np.ndarray:
        """Vectorised ``cell_center`` for an (n, 3) index array."""
        return self.origin + (np.asarray(idx, dtype=float) + 0.5) * self.resolution

    def flat_index(self, idx) -> int:
        return int(np.ravel_multi_index(tuple(idx), self.dims))

    def state(self, p) -> CellState:
        return CellState(int(self.cells[self.world_to_cell(p)]))

    def box_mask(self, lo, hi) -> np.ndarray:
        """Cells whose centers lie inside the closed box [lo, hi]."""
        axes = []
        for a in range(3):
            c = self.origin[a] + (np.arange(self.dims[a]) + 0.5) * self.resolution
            axes.append((c >= lo[a]) & (c <= hi[a]))
        return axes[0][:, None, None] & axes[1][None, :, None] & axes[2][None, None, :]

    def copy(self) -> "VoxelGrid":
        return VoxelGrid(self.origin.copy(), self.resolution, self.dims, self.cells.copy())


@dataclass(frozen=True)
class SensorModel:
    kind: SensorKind
    h_fov: float
    v_fov: float
    max_range: float
    n_azimuth: int
    n_elevation: int

    def __post_init__(self) -> None:
        if self.max_range <= 0:
            raise ValueError("max_range must be positive")
        if self.n_azimuth < 1 or self.n_elevation < 1:
            raise ValueError("ray counts must be >= 1")
        if self.kind is SensorKind.OMNI3D and not math.isclose(self.h_fov, 2 * math.pi):
            raise ValueError("omni3d sensors cover the full horizontal circle")
        if self.kind is SensorKind.CONE and not 0 < self.h_fov < math.pi:
            raise ValueError("cone h_fov must lie in (0, pi)")

    @property
    def ray_count(self) -> int:
        return self.n_azimuth * self.n_elevation


@dataclass
class Scan:
    position: np.ndarray
    heading: float
    directions: np.ndarray
    ranges: np.ndarray
    hit: np.ndarray  # True where the ray stopped on an obstacle

    def __len__(self) -> int:
        return len(self.ranges)

    @property
    def hits(self) -> list[tuple[np.ndarray, float, Termination]]:
        return [
            (d, float(r), Termination.OBSTACLE if h else Termination.MAX_RANGE)
            for d, r, h in zip(self.directions, self.ranges, self.hit)
        ]


def rasterize_box(grid: VoxelGrid, lo, hi, eps: float = 1e-9) -> tuple[slice, slice, slice]:
    """Index slices of cells overlapping the box [lo, hi] with positive volume."""
    lo = (np.asarray(lo, float) - grid.origin) / grid.resolution
    hi = (np.asarray(hi, float) - grid.origin) / grid.resolution
    start = np.floor(lo + eps).astype(int)
    stop = np.ceil(hi - eps).astype(int)
    return tuple(slice(int(a), int(b)) for a, b in zip(start, stop))


def build_world(bounds_min, bounds_max, resolution: float, boxes) -> VoxelGrid:
    """Rasterize axis-aligned obstacle boxes into a ground-truth grid."""
    bounds_min = np.asarray(bounds_min, float)
    bounds_max = np.asarray(bounds_max, float)
    extent = (bounds_max - bounds_min) / resolution
    dims = np.round(extent).astype(int)
    if np.any(np.abs(extent - dims) > 1e-6) or np.any(dims < 1):
        raise BoundsError("bounds extent must be a positive multiple of resolution")
    grid = VoxelGrid.filled(bounds_min, resolution, tuple(dims), CellState.FREE)
    for k, (lo, hi) in enumerate(boxes):
        lo = np.asarray(lo, float)
        hi = np.asarray(hi, float)
        if np.any(lo < bounds_min - 1e-9) or np.any(hi > bounds_max + 1e-9):
            raise BoundsError(f"boxes[{k}] extends outside world bounds")
        if np.any(hi < lo):
            raise BoundsError(f"boxes[{k}] has max < min")
        grid.cells[rasterize_box(grid, lo, hi)] = CellState.OCCUPIED
    return grid


def load_world(scenario_doc) -> VoxelGrid:
    """Parse a scenario document (dict, JSON text or path) into ground truth."""
    from hetex.scenario import parse_scenario

    sc = parse_scenario(scenario_doc)
    return sc.world()


def cast_ray(grid: VoxelGrid, origin, direction, max_range: float) -> tuple[float, Termination]:
    origin = np.asarray(origin, dtype=float)
    direction = np.asarray(direction, dtype=float)
    if not grid.in_bounds(origin):
        raise DomainError("ray origin outside grid")
    r, h = _kernels.cast_many(grid.cells, grid.origin, grid.resolution, origin,
                              direction.reshape(1, 3), float(max_range))
    return float(r[0]), Termination.OBSTACLE if h[0] else Termination.MAX_RANGE


@lru_cache(maxsize=32)
def _local_directions(sensor: SensorModel) -> np.ndarray:
    if sensor.kind is SensorKind.OMNI3D:
        az = np.arange(sensor.n_azimuth) * (2 * math.pi / sensor.n_azimuth)
    else:
        az = _symmetric_lattice(sensor.h_fov, sensor.n_azimuth)
    el = _symmetric_lattice(sensor.v_fov, sensor.n_elevation)
    A, E = np.meshgrid(az, el, indexing="ij")
    dirs = np.stack([np.cos(E) * np.cos(A), np.cos(E) * np.sin(A), np.sin(E)], axis=-1)
    dirs = dirs.reshape(-1, 3)
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    dirs.setflags(write=False)
    return dirs


def _symmetric_lattice(fov: float, n: int) -> np.ndarray:
    if n == 1:
        return np.zeros(1)
    return np.linspace(-fov / 2, fov / 2, n)


def scan_directions(sensor: SensorModel, heading: float) -> np.ndarray:
    local = _local_directions(sensor)
    if sensor.kind is SensorKind.OMNI3D:
        return local.copy()
    c, s = math.cos(heading), math.sin(heading)
    out = local.copy()
    out[:, 0] = c * local[:, 0] - s * local[:, 1]
    out[:, 1] = s * local[:, 0] + c * local[:, 1]
    return out


def sample_scan(grid: VoxelGrid, sensor: SensorModel, position, heading: float = 0.0) -> Scan:
    position = np.asarray(position, dtype=float)
    if not grid.in_bounds(position):
        raise DomainError("sensor pose outside grid")
    if grid.state(position) is CellState.OCCUPIED:
        raise DomainError("sensor pose inside an occupied cell")
    dirs = scan_directions(sensor, heading)
    ranges, hit = _kernels.cast_many(grid.cells, grid.origin, grid.resolution, position,
                                     dirs, float(sensor.max_range))
    return Scan(position.copy(), float(heading), dirs, ranges, hit)
