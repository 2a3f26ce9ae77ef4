"""Frontier detection, single-linkage clustering and POI generation."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from hetex.occupancy_map import ExploredMap
from hetex.voxel_world import CellState

_FACES = ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1))


class PoiSource(str, enum.Enum):
    CENTROID = "centroid"
    SAMPLE = "sample"


@dataclass(frozen=True)
class FrontierCells:
    """Frontier cells as parallel arrays, sorted by flat cell index."""

    index: np.ndarray  # (n, 3) int
    position: np.ndarray  # (n, 3) float, cell centers

    def __len__(self) -> int:
        return len(self.index)


@dataclass(frozen=True)
class Poi:
    position: tuple[float, float, float]
    source: PoiSource
    cluster_id: int
    cell: tuple[int, int, int]

    @property
    def xyz(self) -> np.ndarray:
        return np.asarray(self.position, dtype=float)


def _shift(a: np.ndarray, off: tuple[int, int, int], fill) -> np.ndarray:
    """out[i] = a[i + off], with ``fill`` where i + off leaves the array."""
    out = np.full_like(a, fill)
    src = []
    dst = []
    for o, n in zip(off, a.shape):
        if o >= 0:
            src.append(slice(o, n))
            dst.append(slice(0, n - o))
        else:
            src.append(slice(0, n + o))
            dst.append(slice(-o, n))
    out[tuple(dst)] = a[tuple(src)]
    return out


def detect_frontiers(m: ExploredMap) -> FrontierCells:
    inside = m.explore_mask()
    cells = m.cells
    free = (cells == CellState.FREE) & inside
    unknown_inside = (cells == CellState.UNKNOWN) & inside
    touches = np.zeros_like(free)
    for off in _FACES:
        touches |= _shift(unknown_inside, off, False)
    idx = np.argwhere(free & touches)
    return FrontierCells(idx, m.grid.centers(idx))


def cluster_frontiers(cells: FrontierCells, eps: float) -> list[np.ndarray]:
    """Single-linkage components under distance <= eps.

    Returns member row-index arrays into ``cells``, each sorted by flat cell
    index, and the clusters ordered by their lexicographically smallest cell.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    n = len(cells)
    if n == 0:
        return []
    order = np.lexsort(cells.index.T[::-1])
    pos = cells.position[order]
    pairs = cKDTree(pos).query_pairs(eps * (1 + 1e-12), output_type="ndarray")
    adj = sparse.coo_matrix((np.ones(len(pairs), dtype=np.int8), (pairs[:, 0], pairs[:, 1])),
                            shape=(n, n)) if len(pairs) else sparse.coo_matrix((n, n))
    _, labels = connected_components(adj, directed=False)
    # rows are in cell order, so a stable sort by label keeps members sorted and
    # first occurrence of each label gives the cluster's minimum cell
    _, first = np.unique(labels, return_index=True)
    rank = np.empty(len(first), dtype=np.int64)
    rank[np.argsort(first)] = np.arange(len(first))
    by = np.argsort(rank[labels], kind="stable")
    bounds = np.searchsorted(rank[labels][by], np.arange(len(first) + 1))
    return [order[by[bounds[c]:bounds[c + 1]]] for c in range(len(first))]


def generate_pois(cells: FrontierCells, clusters: list[np.ndarray], m: ExploredMap,
                  samples_per_cluster: int = 3, min_cluster_for_sampling: int = 25,
                  rng_seed: int = 0, tick: int = 0) -> list[Poi]:
    if samples_per_cluster < 0:
        raise ValueError("samples_per_cluster must be >= 0")
    pois: list[Poi] = []
    seen: set[tuple[int, int, int]] = set()

    def add(row: int, source: PoiSource, cid: int) -> None:
        cell = tuple(int(v) for v in cells.index[row])
        if cell in seen or m.cells[cell] != CellState.FREE:
            return
        seen.add(cell)
        pois.append(Poi(tuple(float(v) for v in cells.position[row]), source, cid, cell))

    for cid, members in enumerate(clusters):
        members = _sorted_by_cell(cells, members)
        pts = cells.position[members]
        centroid = pts.mean(axis=0)
        d2 = np.sum((pts - centroid) ** 2, axis=1)
        # argmin returns the first minimum, i.e. the lowest cell index on ties
        snap = int(members[int(np.argmin(d2))])
        add(snap, PoiSource.CENTROID, cid)
        if samples_per_cluster and len(members) >= min_cluster_for_sampling:
            pool = members[members != snap]
            rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([rng_seed, tick, cid])))
            k = min(samples_per_cluster, len(pool))
            for row in rng.choice(pool, size=k, replace=False):
                add(int(row), PoiSource.SAMPLE, cid)
    return pois


def _sorted_by_cell(cells: FrontierCells, members: np.ndarray) -> np.ndarray:
    idx = cells.index[members]
    return members[np.lexsort(idx.T[::-1])]
