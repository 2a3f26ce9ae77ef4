"""Deterministic fixed-timestep mission runner.

The onboard threads of the real system become modules ticked in a fixed
order at their configured rates, so a (scenario, config, seed) triple fully
determines every output byte.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from hetex.allocator import AllocParams, Strategy
from hetex.collision_guard import CollisionGuard, SafetyZone
from hetex.config import MissionConfig
from hetex.errors import CollisionFault
from hetex.frontier_finder import cluster_frontiers, detect_frontiers, generate_pois
from hetex.mission_planner import PlannerState, tick_monitoring, tick_planning
from hetex.occupancy_map import ExploredMap, UavId, explored_fraction, export_map, integrate_scan
from hetex.scenario import Scenario, parse_scenario
from hetex.sphere_map import update as update_spheres
from hetex.uav import UavState
from hetex.voxel_world import CellState, sample_scan

log = logging.getLogger(__name__)

MODULES = ("scan", "frontier", "path", "coll")


@dataclass
class MetricsRecord:
    timeline: list[tuple[float, float]] = field(default_factory=list)
    timings: list[tuple[str, int, float, float | None]] = field(default_factory=list)
    events: list[tuple[int, float, str, str, str, dict]] = field(default_factory=list)
    trajectory: list[tuple] = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    final_map: ExploredMap | None = None


def t_at_fraction(timeline, target: float = 0.95) -> float | None:
    """First time the fraction reaches ``target``, linearly interpolated."""
    prev = None
    for t, f in timeline:
        if f >= target:
            if prev is None or prev[1] == f:
                return t
            t0, f0 = prev
            return t0 + (target - f0) / (f - f0) * (t - t0)
        prev = (t, f)
    return None


class Simulation:
    def __init__(self, scenario, config: MissionConfig | None = None):
        self.scenario: Scenario = parse_scenario(scenario)
        self.config = config or MissionConfig()
        cfg = self.config
        self.truth = self.scenario.world(cfg.map_res)
        eb = self.scenario.explore_bounds
        self.map = ExploredMap.empty_like(self.truth, eb.min, eb.max)
        self.uavs: list[UavState] = []
        for uid in ("pUAV", "sUAV"):
            spec = self.scenario.uav(uid)
            radius = {"pUAV": cfg.s_p, "sUAV": cfg.s_s}[uid] or spec.radius
            u = UavState(UavId.parse(uid), np.array(spec.start, float), spec.heading, radius,
                         spec.speed, spec.heading_rate, spec.sensor.model())
            u.home = u.position.copy()
            if self.truth.state(u.position) is CellState.OCCUPIED:
                raise CollisionFault(f"{uid} starts inside an obstacle")
            self.uavs.append(u)
        self.p, self.s = self.uavs
        self.planner = PlannerState()
        self.guard = CollisionGuard(cfg.d_c, cfg.d_s, cfg.rho)
        self.strategy = Strategy(cfg.allocator)
        self.params = AllocParams(cfg.alpha, cfg.beta, cfg.n_arcs, cfg.c_x, cfg.safety_weight)
        self.eps = cfg.eps if cfg.eps is not None else 3 * self.truth.resolution
        self.periods = {m: cfg.period_steps(r) for m, r in
                        zip(MODULES, (cfg.f_scan, cfg.f_front, cfg.f_path, cfg.f_coll))}
        self.tick_counts = dict.fromkeys(MODULES, 0)
        self.pois = []
        self.graph = None
        self.snapshot_version = -1
        self.pois_generated = 0
        self.dispatch_count = 0
        self.k = 0
        self.t = 0.0
        self.record = MetricsRecord()
        self.fraction = 0.0
        self.halt_violations = 0
        self.min_distance = math.inf
        self._started = False

    # -- bookkeeping -------------------------------------------------------

    def _event(self, source: str, kind: str, uav: str = "", **data) -> None:
        self.record.events.append((self.k, self.t, source, kind, uav, data))

    def _timed(self, module: str, fn) -> None:
        tick = self.tick_counts[module]
        self.tick_counts[module] += 1
        if self.config.measure_timings:
            t0 = time.perf_counter()
            fn()
            self.record.timings.append((module, tick, self.t, (time.perf_counter() - t0) * 1e3))
        else:
            fn()
            self.record.timings.append((module, tick, self.t, None))

    # -- modules -----------------------------------------------------------

    def _scan(self) -> None:
        for u in self.uavs:
            scan = sample_scan(self.truth, u.sensor, u.position, u.heading)
            integrate_scan(self.map, scan, u.id)
        self.fraction = explored_fraction(self.map)
        self.record.timeline.append((self.t, self.fraction))

    def _frontier(self) -> None:
        cfg = self.config
        cells = detect_frontiers(self.map)
        clusters = cluster_frontiers(cells, self.eps)
        self.pois = generate_pois(cells, clusters, self.map, cfg.samples_per_cluster,
                                  cfg.min_cluster_for_sampling, cfg.seed,
                                  self.tick_counts["frontier"])
        self.pois_generated += len(self.pois)
        self.graph = update_spheres(self.graph, self.map, cfg.r_sph, cfg.stride, cfg.r_max,
                                    cfg.goal_snap, cfg.start_snap)
        self.snapshot_version = self.map.version
        self._event("frontier", "pois", frontiers=len(cells), clusters=len(clusters),
                    pois=len(self.pois), spheres=len(self.graph), edges=len(self.graph.edges))

    def _path(self) -> None:
        cfg = self.config
        tick_monitoring(self.planner, self.uavs, cfg.goal_tolerance)
        res = tick_planning(self.planner, self.snapshot_version, self.pois, self.graph, self.uavs,
                            self.strategy, self.params, cfg.goal_tolerance)
        if res.assignment is not None:
            a = res.assignment
            self._event("planner", "assign", strategy=self.strategy.value, pois=res.n_pois,
                        arcs=a.n_arcs, total_cost=a.total_cost,
                        goal_p=list(a.goal_p.position) if a.goal_p else None,
                        goal_s=list(a.goal_s.position) if a.goal_s else None)
        for d in res.dispatches:
            self.dispatch_count += 1
            if d.poi is None:
                self._event("planner", "standby", d.uav.label, goal=[float(v) for v in d.waypoints[-1]],
                            waypoints=len(d.waypoints), length=round(d.length_m, 6))
            else:
                self._event("planner", "dispatch", d.uav.label, goal=list(d.poi.position),
                            waypoints=len(d.waypoints), length=round(d.length_m, 6))

    def _coll(self) -> None:
        g = self.graph
        events = self.guard.tick(self.p, self.s, g.edt if g else None, g.grid if g else None)
        for e in events:
            self._event("guard", e.kind, e.uav, **e.data)

    def _move(self) -> None:
        dt = self.config.dt
        zone = self.guard.zone
        moved_p = 0.0
        for u in self.uavs:
            if u.halted or not u.active_path:
                continue
            wp = u.active_path[0]
            delta = wp - u.position
            dist = float(np.linalg.norm(delta))
            reach = u.speed * dt
            arrived = dist <= reach + 1e-9
            new = wp.copy() if arrived else u.position + delta * (reach / dist)
            if not self.truth.in_bounds(new) or self.truth.state(new) is CellState.OCCUPIED:
                raise CollisionFault(f"{u.id.label} would enter an occupied cell at {new.tolist()}")
            step = new - u.position
            target = None
            if u.hold_heading:
                pass
            elif abs(step[0]) > 1e-12 or abs(step[1]) > 1e-12:
                target = math.atan2(step[1], step[0])
            elif len(u.active_path) == 1 and u.goal_heading is not None:
                target = u.goal_heading  # yaw in place at the final waypoint
            if target is not None:
                diff = math.atan2(math.sin(target - u.heading), math.cos(target - u.heading))
                lim = u.heading_rate * dt
                u.heading = target if abs(diff) <= lim else \
                    math.atan2(math.sin(u.heading + math.copysign(lim, diff)),
                               math.cos(u.heading + math.copysign(lim, diff)))
            if arrived and (len(u.active_path) > 1 or u.heading_aligned()):
                u.active_path.pop(0)
            if u is self.p:
                moved_p = float(np.linalg.norm(step))
            u.position = new
            if not u.active_path:
                u.active_path = None
        if moved_p > 0 and zone in (SafetyZone.CRITICAL, SafetyZone.CAUTION):
            self.halt_violations += 1
        d = float(np.linalg.norm(self.p.position - self.s.position))
        self.min_distance = min(self.min_distance, d)
        self.record.trajectory.append((self.k, self.t, *self.p.position, *self.s.position,
                                       zone.value if zone else "", moved_p))

    # -- driving -----------------------------------------------------------

    def _modules(self) -> None:
        k = self.k
        if k % self.periods["scan"] == 0:
            self._timed("scan", self._scan)
        if self.config.autonomy:
            if k % self.periods["frontier"] == 0:
                self._timed("frontier", self._frontier)
            if k % self.periods["path"] == 0:
                self._timed("path", self._path)
        if k % self.periods["coll"] == 0:
            self._timed("coll", self._coll)

    def start(self) -> None:
        if not self._started:
            self._started = True
            self._modules()

    def step(self) -> None:
        self.start()
        self.k += 1
        self.t = self.k * self.config.dt
        self._move()
        self._modules()

    def done(self) -> bool:
        return self.fraction >= self.config.completion_target or self.t >= self.config.t_max

    def run(self) -> MetricsRecord:
        self.start()
        fault = None
        try:
            while not self.done():
                self.step()
        except CollisionFault as exc:
            fault = str(exc)
            self._event("sim", "collision_fault", message=fault)
        return self.finish(fault)

    def finish(self, fault: str | None = None) -> MetricsRecord:
        cfg = self.config
        v_max = max(u.speed for u in self.uavs)
        floor = cfg.d_c - 2 * v_max / cfg.f_coll
        t95 = t_at_fraction(self.record.timeline, 0.95)
        self.record.summary = {
            "scenario": self.scenario.name,
            "allocator": self.strategy.value,
            "seed": cfg.seed,
            "complete": self.fraction >= cfg.completion_target and fault is None,
            "completion_target": cfg.completion_target,
            "t_95": None if t95 is None else round(t95, 6),
            "final_fraction": round(self.fraction, 9),
            "sim_time": round(self.t, 6),
            "steps": self.k,
            "pois_generated": self.pois_generated,
            "dispatches": self.dispatch_count,
            "visited": len(self.planner.visited),
            "interventions": self.guard.interventions,
            "escapes": sum(1 for e in self.record.events if e[3] == "escape"),
            "min_uav_distance": round(self.min_distance, 6),
            "safety_floor": round(floor, 6),
            "safety_floor_ok": bool(self.min_distance >= floor),
            "halt_violations": self.halt_violations,
            "collision_fault": fault,
            "tick_counts": dict(self.tick_counts),
            "config": cfg.to_dict(),
        }
        self.record.final_map = self.map
        return self.record


def run_mission(scenario, config: MissionConfig | None = None) -> MetricsRecord:
    return Simulation(scenario, config).run()


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return f"{x:.6f}"
    return str(x)


def write_outputs(record: MetricsRecord, out_dir) -> list[Path]:
    """Write the stable output set.

    timeline.csv   t,fraction
    timings.csv    module,tick,t,duration_ms   (duration blank unless measured)
    events.csv     step,t,source,kind,uav,data (data: JSON object, sorted keys)
    trajectory.csv step,t,px,py,pz,sx,sy,sz,zone,p_moved
    summary.json   run summary, sorted keys
    map.bin        final explored map (see hetex.occupancy_map.export_map)
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def table(name, header, rows):
        path = out / name
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
        written.append(path)

    table("timeline.csv", ["t", "fraction"],
          ([_fmt(t), f"{f:.9f}"] for t, f in record.timeline))
    table("timings.csv", ["module", "tick", "t", "duration_ms"],
          ([m, k, _fmt(t), "" if d is None else f"{d:.3f}"] for m, k, t, d in record.timings))
    table("events.csv", ["step", "t", "source", "kind", "uav", "data"],
          ([k, _fmt(t), src, kind, uav, json.dumps(_jsonable(data), sort_keys=True)]
           for k, t, src, kind, uav, data in record.events))
    table("trajectory.csv", ["step", "t", "px", "py", "pz", "sx", "sy", "sz", "zone", "p_moved"],
          ([row[0]] + [_fmt(v) for v in row[1:8]] + [row[8], _fmt(row[9])]
           for row in record.trajectory))
    path = out / "summary.json"
    path.write_text(json.dumps(_jsonable(record.summary), sort_keys=True, indent=2) + "\n")
    written.append(path)
    if record.final_map is not None:
        path = out / "map.bin"
        export_map(record.final_map, path)
        written.append(path)
    return written


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return round(float(obj), 6)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj
