"""Three-zone inter-UAV safety protocol."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from hetex.mission_planner import dilated_free, grid_astar
from hetex.occupancy_map import UavId
from hetex.uav import UavState
from hetex.voxel_world import VoxelGrid


class SafetyZone(str, enum.Enum):
    CRITICAL = "critical"
    CAUTION = "caution"
    SAFE = "safe"


def classify(x_p, x_s, d_c: float, d_s: float) -> SafetyZone:
    if not 0 < d_c < d_s:
        raise ValueError("need 0 < d_C < d_S")
    d = float(np.linalg.norm(np.asarray(x_p, float) - np.asarray(x_s, float)))
    if d < d_c:
        return SafetyZone.CRITICAL
    if d < d_s:
        return SafetyZone.CAUTION
    return SafetyZone.SAFE


def escape_goal(x_p, x_s, phi_s: float) -> tuple[np.ndarray, float]:
    """Step 1 m directly away from the pUAV at constant altitude.

    If that step has no horizontal component (UAVs stacked vertically or
    coincident) the sUAV steps along its own heading instead.
    """
    x_p = np.asarray(x_p, float)
    x_s = np.asarray(x_s, float)
    delta = x_s - x_p
    norm = float(np.linalg.norm(delta))
    if norm > 0:
        g = x_s + delta / norm
        g[2] = x_s[2]
        if g[0] != x_s[0] or g[1] != x_s[1]:
            return g, phi_s
    g = x_s + np.array([math.cos(phi_s), math.sin(phi_s), 0.0])
    g[2] = x_s[2]
    return g, phi_s


@dataclass
class GuardEvent:
    kind: str
    uav: str
    data: dict


@dataclass
class CollisionGuard:
    d_c: float
    d_s: float
    goal_relax: float = 1.0
    idle_ticks_limit: int = 10  # an sUAV idle this long in Caution is moved away
    zone: SafetyZone | None = None
    escaping: bool = False
    halted_p: bool = False
    idle_ticks: int = 0
    interventions: int = 0
    history: list[SafetyZone] = field(default_factory=list)

    def tick(self, p: UavState, s: UavState, edt: np.ndarray | None,
             grid: VoxelGrid | None) -> list[GuardEvent]:
        events: list[GuardEvent] = []
        zone = classify(p.position, s.position, self.d_c, self.d_s)
        dist = float(np.linalg.norm(p.position - s.position))
        if zone is not self.zone:
            events.append(GuardEvent("zone", "", {"from": self.zone.value if self.zone else None,
                                                  "to": zone.value, "d": round(dist, 6)}))
        self.zone = zone
        self.history.append(zone)

        if zone is not SafetyZone.SAFE and not self.halted_p:
            p.halted = True
            self.halted_p = True
            self.interventions += 1
            events.append(GuardEvent("halt", "pUAV", {"d": round(dist, 6)}))

        # the pUAV waits for the sUAV to finish its current action; an sUAV
        # with no action would keep it waiting forever
        idle = zone is SafetyZone.CAUTION and not s.active_path and not self.escaping
        self.idle_ticks = self.idle_ticks + 1 if idle else 0
        stuck = self.idle_ticks >= self.idle_ticks_limit

        if (zone is SafetyZone.CRITICAL or stuck) and not self.escaping:
            self.escaping = True
            self.idle_ticks = 0
            s.guard_locked = True
            preempted = s.assigned_poi
            s.assigned_poi = None
            s.active_path = None
            events.append(GuardEvent("preempt", "sUAV", {
                "poi": list(preempted.position) if preempted else None}))

        # escape maneuvers repeat until the hysteresis threshold d_S is reached
        if self.escaping and zone is not SafetyZone.SAFE and not s.active_path:
            events.append(self._escape(p, s, edt, grid))

        if zone is SafetyZone.SAFE:
            if self.escaping:
                self.escaping = False
                s.guard_locked = False
                s.active_path = None
                events.append(GuardEvent("requeue", "sUAV", {}))
            if self.halted_p:
                p.halted = False
                self.halted_p = False
                events.append(GuardEvent("resume", "pUAV", {"d": round(dist, 6)}))
        return events

    def _escape(self, p: UavState, s: UavState, edt, grid) -> GuardEvent:
        g, theta = escape_goal(p.position, s.position, s.heading)
        path = None
        cornered = False
        if edt is not None:
            path = grid_astar(edt, grid, s.position, g, s.radius, self.goal_relax)
            d0 = float(np.linalg.norm(s.position - p.position))
            if path is None or _separation(path[-1], p.position) < d0 + grid.resolution / 2:
                # the unit step is walled off: head for the nearest reachable
                # spot at the same altitude that is clear of the caution zone
                alt = retreat_goal(edt, grid, s.position, p.position, s.radius,
                                   self.d_s + grid.resolution)
                if alt is not None:
                    cornered = True
                    g = alt
                    path = grid_astar(edt, grid, s.position, g, s.radius, self.goal_relax)
        if path is None:
            return GuardEvent("stall", "sUAV", {"goal": _r(g)})
        s.dispatch(path, None, hold_heading=True)
        return GuardEvent("escape", "sUAV", {"goal": _r(g), "heading": round(theta, 9),
                                             "x_s": _r(s.position), "x_p": _r(p.position),
                                             "waypoints": len(path), "cornered": cornered})


def _separation(a, b) -> float:
    return float(np.linalg.norm(np.asarray(a, float) - np.asarray(b, float)))


def retreat_goal(edt: np.ndarray, grid: VoxelGrid, x_s, x_p, uav_radius: float,
                 min_sep: float) -> np.ndarray | None:
    """Nearest cell reachable from ``x_s`` on the dilated grid whose center is
    at least ``min_sep`` from ``x_p``.

    Candidates are restricted to the altitude layer of ``x_s`` (the goal keeps
    x_s.z exactly); ties go to the lower flat cell index.
    """
    x_s = np.asarray(x_s, float)
    x_p = np.asarray(x_p, float)
    free = dilated_free(edt, uav_radius)
    s = np.floor((x_s - grid.origin) / grid.resolution).astype(int)
    if np.any(s < 0) or np.any(s >= np.asarray(grid.dims)):
        return None
    free[tuple(s)] = True
    labels, _ = ndimage.label(free, structure=np.ones((3, 3, 3), dtype=bool))
    layer = labels[:, :, s[2]] == labels[tuple(s)]
    idx = np.argwhere(layer)
    idx = np.column_stack([idx, np.full(len(idx), s[2])])
    pts = grid.centers(idx)
    pts[:, 2] = x_s[2]
    ok = np.linalg.norm(pts - x_p, axis=1) >= min_sep
    if not np.any(ok):
        return None
    idx, pts = idx[ok], pts[ok]
    d = np.linalg.norm(pts - x_s, axis=1)
    flat = np.ravel_multi_index(idx.T, grid.dims)
    return pts[np.lexsort((flat, d))[0]]


def _r(v) -> list[float]:
    return [float(x) for x in v]
