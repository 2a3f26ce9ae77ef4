"""Monitoring/planning state machine and the grid A* used for escapes."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from hetex import _kernels
from hetex.allocator import AllocParams, Assignment, Strategy, assign
from hetex.frontier_finder import Poi
from hetex.occupancy_map import UavId
from hetex.sphere_map import SphereGraph, plan, segment_clearance
from hetex.uav import UavState
from hetex.voxel_world import CellState, SensorKind, VoxelGrid


class Mode(str, enum.Enum):
    MONITORING = "monitoring"
    PLANNING = "planning"


@dataclass
class PlannerState:
    mode: Mode = Mode.MONITORING
    waiting: set[UavId] = field(default_factory=set)
    visited: list[Poi] = field(default_factory=list)
    last_map_version: int = -1


@dataclass
class Dispatch:
    uav: UavId
    poi: Poi | None  # None: standby flight home
    waypoints: list[np.ndarray]
    length_m: float


@dataclass
class PlanningResult:
    assignment: Assignment | None = None
    dispatches: list[Dispatch] = field(default_factory=list)
    n_pois: int = 0
    blocked: bool = False


def tick_monitoring(state: PlannerState, uavs: list[UavState],
                    goal_tolerance: float = 0.3) -> PlannerState:
    """UAVs within tolerance of their goal (or with no path) start waiting."""
    if state.mode is not Mode.MONITORING:
        return state
    for u in uavs:
        if u.guard_locked:
            continue
        if u.active_path and np.linalg.norm(u.position - u.goal) <= goal_tolerance \
                and u.heading_aligned():
            u.active_path = None
        if u.active_path:
            continue
        if u.assigned_poi is not None:
            state.visited.append(u.assigned_poi)
            u.assigned_poi = None
        state.waiting.add(u.id)
    if state.waiting:
        state.mode = Mode.PLANNING
    return state


def filter_pois(pois: list[Poi], visited: list[Poi], active_goals: list[np.ndarray],
                tol: float) -> list[Poi]:
    blocked = [v.xyz for v in visited] + list(active_goals)
    if not blocked:
        return list(pois)
    b = np.asarray(blocked)
    out = []
    for p in pois:
        if np.min(np.linalg.norm(b - p.xyz, axis=1)) > tol:
            out.append(p)
    return out


def tick_planning(state: PlannerState, snapshot_version: int, pois: list[Poi],
                  graph: SphereGraph | None, uavs: list[UavState], strategy: Strategy,
                  params: AllocParams, goal_tolerance: float = 0.3) -> PlanningResult:
    if state.mode is not Mode.PLANNING:
        return PlanningResult()
    if snapshot_version <= state.last_map_version:
        return PlanningResult(blocked=True)
    state.last_map_version = snapshot_version

    by_id = {u.id: u for u in uavs}
    p, s = by_id[UavId.PUAV], by_id[UavId.SUAV]
    busy_goals = [u.assigned_poi.xyz for u in uavs
                  if u.id not in state.waiting and u.assigned_poi is not None]
    candidates = filter_pois(pois, state.visited, busy_goals, goal_tolerance)
    result = PlanningResult(n_pois=len(candidates))
    result.assignment = assign(strategy, candidates, p.position, s.position, s.heading,
                               graph, p.radius, s.radius, params)
    for uid in (UavId.PUAV, UavId.SUAV):
        if uid not in state.waiting:
            continue
        u = by_id[uid]
        poi = result.assignment.goal(uid)
        if u.guard_locked or graph is None:
            continue
        if poi is None:
            # a pUAV with nothing to do returns to standby instead of parking
            # where it last explored, typically a doorway the sUAV needs
            if uid is not UavId.PUAV or u.home is None or \
                    np.linalg.norm(u.position - u.home) <= goal_tolerance:
                continue
            target = u.home
        else:
            target = poi.xyz
        path = plan(graph, u.position, target, u.radius, params.safety_weight)
        if path is None:
            continue
        waypoints = shortcut(u.position, list(path.waypoints), graph.edt, graph.grid, u.radius)
        yaw = None
        if poi is not None and u.sensor.kind is SensorKind.CONE:
            yaw = view_heading(graph.grid, poi, waypoints[-1])
        u.dispatch(waypoints, poi, goal_heading=yaw)
        state.waiting.discard(uid)
        pts = np.vstack([u.position] + waypoints)
        result.dispatches.append(Dispatch(uid, poi, waypoints,
                                          float(np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1)))))
    state.mode = Mode.MONITORING
    return result


def view_heading(grid: VoxelGrid, poi: Poi, standpoint, reach: int = 2) -> float | None:
    """Yaw that points a narrow sensor from ``standpoint`` at the unknown
    space around ``poi``.

    The look direction is the horizontal mean offset of the Unknown cells
    within ``reach`` cells of the POI; when that vanishes (unknown only above
    or below) the bearing from the standpoint to the POI is used instead.
    """
    c = np.asarray(poi.cell)
    lo = np.maximum(c - reach, 0)
    hi = np.minimum(c + reach + 1, np.asarray(grid.dims))
    sub = grid.cells[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]]
    idx = np.argwhere(sub == CellState.UNKNOWN) + lo
    v = np.zeros(2)
    if len(idx):
        v = np.mean(idx[:, :2] - c[:2], axis=0)
    if np.hypot(v[0], v[1]) < 1e-9:
        v = poi.xyz[:2] - np.asarray(standpoint, float)[:2]
        if np.hypot(v[0], v[1]) < 1e-9:
            return None
    return math.atan2(v[1], v[0])


def shortcut(start, waypoints: list[np.ndarray], edt: np.ndarray, grid: VoxelGrid,
             clearance: float) -> list[np.ndarray]:
    """Greedy shortcutting: jump to the farthest waypoint with a clear segment."""
    pts = [np.asarray(start, float)] + [np.asarray(w, float) for w in waypoints]
    out = []
    i = 0
    last = len(pts) - 1
    while i < last:
        j = last
        while j > i + 1 and segment_clearance(edt, grid, pts[i], pts[j])[0] < clearance:
            j -= 1
        out.append(pts[j])
        i = j
    return out


# -- grid A* -------------------------------------------------------------------

def dilated_free(edt: np.ndarray, uav_radius: float) -> np.ndarray:
    """Cells whose center keeps ``uav_radius`` from every non-free cell center."""
    return edt >= uav_radius


def _cell_of(grid: VoxelGrid, p) -> np.ndarray:
    return np.floor((np.asarray(p, float) - grid.origin) / grid.resolution).astype(np.int64)


def grid_astar(edt: np.ndarray, grid: VoxelGrid, start, goal, uav_radius: float,
               goal_relax: float = 1.0, max_goal_tries: int = 3) -> list[np.ndarray] | None:
    """A* on the dilated grid; relaxes an infeasible goal to the nearest
    feasible cell within ``goal_relax``."""
    free = dilated_free(edt, uav_radius)
    dims = np.asarray(grid.dims)
    s = _cell_of(grid, start)
    if np.any(s < 0) or np.any(s >= dims):
        return None
    free[tuple(s)] = True  # the UAV is already there
    goal = np.asarray(goal, float)
    g = _cell_of(grid, goal)
    if np.all(g >= 0) and np.all(g < dims) and free[tuple(g)]:
        targets = [(g, goal)]
    else:
        targets = [(c, grid.cell_center(c)) for c in _relaxed_goals(free, grid, goal, goal_relax,
                                                                     max_goal_tries)]
    for cell, point in targets:
        cells = _kernels.astar_grid(free, s, cell.astype(np.int64), grid.resolution)
        if len(cells) == 0:
            continue
        if len(cells) == 1:
            return [point]
        return [grid.cell_center(c) for c in cells[1:-1]] + [point]
    return None


def _relaxed_goals(free: np.ndarray, grid: VoxelGrid, goal: np.ndarray, rho: float,
                   limit: int) -> list[np.ndarray]:
    lo = np.maximum(_cell_of(grid, goal - rho), 0)
    hi = np.minimum(_cell_of(grid, goal + rho) + 1, np.asarray(grid.dims))
    if np.any(hi <= lo):
        return []
    sub = free[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]]
    idx = np.argwhere(sub) + lo
    if len(idx) == 0:
        return []
    d = np.linalg.norm(grid.centers(idx) - goal, axis=1)
    keep = d <= rho
    idx, d = idx[keep], d[keep]
    flat = np.ravel_multi_index(idx.T, grid.dims)
    order = np.lexsort((flat, d))
    return [idx[k] for k in order[:limit]]


def path_cost(points: list[np.ndarray]) -> float:
    pts = np.asarray(points)
    return float(np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1))) if len(pts) > 1 else 0.0
