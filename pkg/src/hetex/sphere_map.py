"""Sphere-graph free-space representation and clearance-aware planning.

Sphere centers sit on a stride-k sub-lattice of free cells; a sphere's radius
is its exact Euclidean distance to the nearest non-free cell (Unknown counts
as an obstacle, so does everything outside the grid), capped at ``r_max``.
Edges join intersecting spheres that are neighbours on the sub-lattice.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage, sparse
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from hetex import _kernels
from hetex.occupancy_map import ExploredMap
from hetex.voxel_world import CellState, VoxelGrid

# forward half of the 26-neighbourhood; the other half is implied by symmetry
_FORWARD = np.array([o for o in np.ndindex(3, 3, 3)]) - 1
_FORWARD = _FORWARD[[tuple(o) > (0, 0, 0) for o in _FORWARD]]


def clearance_field(m: ExploredMap) -> np.ndarray:
    """Distance (m) from each cell center to the nearest non-free cell center."""
    free = m.cells == CellState.FREE
    padded = np.pad(free, 1, constant_values=False)
    edt = ndimage.distance_transform_edt(padded, sampling=m.grid.resolution)
    return edt[1:-1, 1:-1, 1:-1]


def point_clearance(edt: np.ndarray, grid: VoxelGrid, pts: np.ndarray) -> np.ndarray:
    """Lower bound on obstacle distance at arbitrary points.

    By the triangle inequality, dist(p) >= edt(cell(p)) - |p - center(cell(p))|.
    """
    pts = np.asarray(pts, dtype=float)
    rel = (pts - grid.origin) / grid.resolution
    idx = np.floor(rel).astype(np.int64)
    dims = np.asarray(grid.dims)
    inside = np.all((idx >= 0) & (idx < dims), axis=-1)
    idx = np.clip(idx, 0, dims - 1)
    centers = grid.origin + (idx + 0.5) * grid.resolution
    off = np.linalg.norm(pts - centers, axis=-1)
    val = edt[idx[..., 0], idx[..., 1], idx[..., 2]] - off
    return np.where(inside, val, -np.inf)


def segment_clearance(edt: np.ndarray, grid: VoxelGrid, a, b) -> np.ndarray:
    """Rigorous lower bound on obstacle distance along segments a->b.

    Accepts single points or (n, 3) arrays.  Samples every res/4 and subtracts
    half the sample spacing to cover the gaps between samples.
    """
    a = np.ascontiguousarray(np.atleast_2d(np.asarray(a, dtype=float)))
    b = np.ascontiguousarray(np.atleast_2d(np.asarray(b, dtype=float)))
    return _kernels.segment_clearance_many(edt, grid.origin, float(grid.resolution), a, b)


@dataclass
class SpherePath:
    waypoints: np.ndarray  # (k, 3)
    nodes: list[int]
    min_clearance: float
    length_m: float
    cost: float
    start: np.ndarray

    @property
    def waypoint_count(self) -> int:
        return len(self.waypoints)


@dataclass
class SphereGraph:
    centers: np.ndarray
    radii: np.ndarray
    cells: np.ndarray
    edges: np.ndarray  # (E, 2), a < b
    edge_clearance: np.ndarray  # (E,)
    built_from_version: int
    grid: VoxelGrid = field(repr=False)  # snapshot cells the graph was built from
    edt: np.ndarray = field(repr=False)
    r_sph: float = 0.35
    goal_snap: float = 1.0
    start_snap: float = 1.0
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        n = len(self.centers)
        e = self.edges
        src = np.concatenate([e[:, 0], e[:, 1]]) if len(e) else np.zeros(0, np.int64)
        dst = np.concatenate([e[:, 1], e[:, 0]]) if len(e) else np.zeros(0, np.int64)
        eid = np.concatenate([np.arange(len(e)), np.arange(len(e))])
        order = np.lexsort((dst, src))
        self._dst = dst[order].astype(np.int64)
        self._eid = eid[order]
        self._indptr = np.searchsorted(src[order], np.arange(n + 1)).astype(np.int64)
        if len(e):
            self._length = np.linalg.norm(self.centers[e[:, 0]] - self.centers[e[:, 1]], axis=1)
            self._rmin = np.minimum(self.radii[e[:, 0]], self.radii[e[:, 1]])
        else:
            self._length = np.zeros(0)
            self._rmin = np.zeros(0)
        self._tree = cKDTree(self.centers) if n else None

    def __len__(self) -> int:
        return len(self.centers)

    def neighbors(self, i: int) -> np.ndarray:
        return self._dst[self._indptr[i]:self._indptr[i + 1]]

    def edge_weights(self, safety_weight: float) -> np.ndarray:
        return self._length * (1.0 + safety_weight / self._rmin)

    def to_dict(self) -> dict:
        return {
            "version": self.built_from_version,
            "centers": np.round(self.centers, 6).tolist(),
            "radii": np.round(self.radii, 6).tolist(),
            "edges": self.edges.tolist(),
        }

    # -- queries -----------------------------------------------------------

    def _admissible(self, uav_radius: float):
        key = ("mask", uav_radius)
        if key not in self._cache:
            node_ok = self.radii >= uav_radius
            edge_ok = self.edge_clearance[self._eid] >= uav_radius
            self._cache[key] = (node_ok, edge_ok)
        return self._cache[key]

    def _sssp(self, source: int, uav_radius: float, safety_weight: float):
        key = ("sssp", source, uav_radius, safety_weight)
        if key not in self._cache:
            wkey = ("w", safety_weight)
            if wkey not in self._cache:
                self._cache[wkey] = self.edge_weights(safety_weight)[self._eid]
            node_ok, edge_ok = self._admissible(uav_radius)
            self._cache[key] = _kernels.dijkstra_csr(
                self._indptr, self._dst, self._cache[wkey], edge_ok, node_ok, source)
        return self._cache[key]

    def _body_nodes(self, p: np.ndarray, uav_radius: float, slack: float = 0.0) -> list[tuple[float, int]]:
        """Admissible nodes with |p - c| <= r - s + slack, as (excess, id) sorted."""
        if self._tree is None:
            return []
        cand = self._tree.query_ball_point(p, float(self.radii.max()) + slack)
        out = []
        for i in cand:
            r = self.radii[i]
            if r < uav_radius:
                continue
            d = float(np.linalg.norm(p - self.centers[i]))
            if d <= r - uav_radius + slack + 1e-12:
                out.append((d, i))
        out.sort()
        return out

    def _components(self, uav_radius: float) -> np.ndarray:
        key = ("comp", uav_radius)
        if key not in self._cache:
            node_ok = self._admissible(uav_radius)[0]
            e = self.edges[self.edge_clearance >= uav_radius]
            e = e[node_ok[e[:, 0]] & node_ok[e[:, 1]]]
            n = len(self)
            adj = sparse.coo_matrix((np.ones(len(e), np.int8), (e[:, 0], e[:, 1])), shape=(n, n))
            self._cache[key] = connected_components(adj, directed=False)[1]
        return self._cache[key]

    def start_candidates(self, start, uav_radius: float) -> list[int]:
        """Start nodes in preference order, one per admissible component.

        Nodes containing the body come first (nearest first), then nodes within
        ``start_snap`` that the start sees through known-free cells.
        """
        start = np.asarray(start, dtype=float)
        order = [i for _, i in self._body_nodes(start, uav_radius)]
        if self._tree is not None:
            for i in sorted(self._tree.query_ball_point(start, self.start_snap),
                            key=lambda i: (float(np.linalg.norm(start - self.centers[i])), i)):
                if self.radii[i] >= uav_radius and self._segment_known_free(start, self.centers[i]):
                    order.append(int(i))
        if not order:
            return []
        comp = self._components(uav_radius)
        out, seen = [], set()
        for i in order:
            if comp[i] not in seen:
                seen.add(comp[i])
                out.append(int(i))
        return out

    def start_node(self, start, uav_radius: float) -> int | None:
        cand = self.start_candidates(start, uav_radius)
        return cand[0] if cand else None

    def _segment_known_free(self, a: np.ndarray, b: np.ndarray) -> bool:
        g = self.grid
        n = int(np.ceil(np.linalg.norm(b - a) / (g.resolution / 4))) + 1
        pts = a + (b - a) * np.linspace(0, 1, n)[:, None]
        idx = np.floor((pts - g.origin) / g.resolution).astype(int)
        if np.any(idx < 0) or np.any(idx >= np.asarray(g.dims)):
            return False
        return bool(np.all(g.cells[idx[:, 0], idx[:, 1], idx[:, 2]] == CellState.FREE))


def update(graph: SphereGraph | None, snapshot: ExploredMap, r_sph: float = 0.35,
           stride: int = 2, r_max: float = 2.0, goal_snap: float = 1.0,
           start_snap: float = 1.0) -> SphereGraph:
    """Rebuild the sphere graph from a map snapshot.

    A full rebuild is deterministic and drops every node that newly observed
    obstacles invalidated, so ``graph`` is only used to skip no-op rebuilds.
    """
    if graph is not None and graph.built_from_version == snapshot.version and \
            np.array_equal(graph.grid.cells, snapshot.cells):
        return graph
    edt = clearance_field(snapshot)
    grid = snapshot.grid.copy()
    lattice = np.zeros(grid.dims, dtype=bool)
    lattice[::stride, ::stride, ::stride] = True
    ok = lattice & (grid.cells == CellState.FREE) & (edt >= r_sph)
    cells = np.argwhere(ok)
    centers = grid.centers(cells)
    radii = np.minimum(edt[ok], r_max)

    node_id = np.full(grid.dims, -1, dtype=np.int64)
    node_id[ok] = np.arange(len(cells))
    pairs = []
    for off in _FORWARD:
        nb = cells + off * stride
        inside = np.all((nb >= 0) & (nb < np.asarray(grid.dims)), axis=1)
        a = np.nonzero(inside)[0]
        b = node_id[nb[inside, 0], nb[inside, 1], nb[inside, 2]]
        keep = b >= 0
        pairs.append(np.stack([a[keep], b[keep]], axis=1))
    edges = np.concatenate(pairs) if pairs else np.zeros((0, 2), np.int64)
    if len(edges):
        d = np.linalg.norm(centers[edges[:, 0]] - centers[edges[:, 1]], axis=1)
        edges = edges[d < radii[edges[:, 0]] + radii[edges[:, 1]]]
        edges = np.sort(edges, axis=1)
        edges = edges[np.lexsort((edges[:, 1], edges[:, 0]))]
        clear = segment_clearance(edt, grid, centers[edges[:, 0]], centers[edges[:, 1]])
        clear = np.minimum(clear, np.minimum(radii[edges[:, 0]], radii[edges[:, 1]]))
    else:
        edges = np.zeros((0, 2), np.int64)
        clear = np.zeros(0)
    return SphereGraph(centers, radii, cells, edges.astype(np.int64), clear, snapshot.version,
                       grid, edt, r_sph=r_sph, goal_snap=goal_snap, start_snap=start_snap)


def plan(graph: SphereGraph, start, goal, uav_radius: float,
         safety_weight: float = 0.2) -> SpherePath | None:
    """Clearance-constrained shortest path, or None.

    Nodes need radius >= uav_radius and edges a segment clearance >= uav_radius.
    The final waypoint keeps the whole UAV body inside the goal sphere: it is
    the goal itself when possible, otherwise the goal projected onto the
    shrunken sphere of a node within ``goal_snap`` whose projection sees the
    goal through known-free cells.
    """
    if uav_radius <= 0:
        raise ValueError("uav_radius must be positive")
    start = np.asarray(start, dtype=float)
    goal = np.asarray(goal, dtype=float)
    for src in graph.start_candidates(start, uav_radius):
        found = _plan_from(graph, src, start, goal, uav_radius, safety_weight)
        if found is not None:
            return found
    return None


def _plan_from(graph: SphereGraph, src: int, start: np.ndarray, goal: np.ndarray,
               uav_radius: float, safety_weight: float) -> SpherePath | None:
    dist, pred = graph._sssp(src, uav_radius, safety_weight)
    target = None
    final = goal
    for _, i in graph._body_nodes(goal, uav_radius):
        if np.isfinite(dist[i]):
            target = i
            break
    if target is None:
        snaps = []
        for d, i in graph._body_nodes(goal, uav_radius, slack=graph.goal_snap):
            if np.isfinite(dist[i]):
                snaps.append((d - (graph.radii[i] - uav_radius), i, d))
        snaps.sort()
        for _, i, d in snaps:
            c = graph.centers[i]
            p = c + (goal - c) * ((graph.radii[i] - uav_radius) / d) if d > 0 else c.copy()
            # the goal must stay in view of the snapped point, not behind a wall
            if graph._segment_known_free(p, goal):
                target, final = i, p
                break
        if target is None:
            return None

    nodes = [int(target)]
    while nodes[-1] != src:
        nodes.append(int(pred[nodes[-1]]))
    nodes.reverse()

    c0, r0 = graph.centers[src], graph.radii[src]
    if len(nodes) == 1 and np.linalg.norm(start - c0) <= r0 - uav_radius + 1e-12:
        waypoints = final[None, :].copy()
    else:
        waypoints = np.vstack([graph.centers[nodes], final[None, :]])
    pts = np.vstack([start[None, :], waypoints])
    length = float(np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1)))
    return SpherePath(waypoints, nodes, float(graph.radii[nodes].min()), length,
                      float(dist[target]), start.copy())


def is_accessible(graph: SphereGraph, start, poi, uav_radius: float,
                  safety_weight: float = 0.2) -> bool:
    p = getattr(poi, "xyz", poi)
    return plan(graph, start, p, uav_radius, safety_weight) is not None
