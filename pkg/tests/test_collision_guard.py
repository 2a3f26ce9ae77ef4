from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import door_world
from hetex.collision_guard import CollisionGuard, SafetyZone, classify, escape_goal, retreat_goal
from hetex.config import MissionConfig
from hetex.occupancy_map import ExploredMap, UavId
from hetex.sim import Simulation
from hetex.sphere_map import clearance_field, update
from hetex.uav import UavState
from hetex.voxel_world import CellState, VoxelGrid


def _uav(uid, pos, heading=0.0, radius=0.25, speed=1.0, office=None) -> UavState:
    return UavState(uid, np.array(pos, float), heading, radius, speed, 1.0,
                    office.uav(uid.label).sensor.model())


def test_zone_sweep():
    zones = [classify((0, 0, 0), (d, 0, 0), 2.0, 2.5) for d in np.arange(0.0, 3.01, 0.05)]
    ds = np.arange(0.0, 3.01, 0.05)
    for d, z in zip(ds, zones):
        want = SafetyZone.CRITICAL if d < 2.0 else (SafetyZone.CAUTION if d < 2.5 else SafetyZone.SAFE)
        assert z is want
    assert classify((0, 0, 0), (2.0, 0, 0), 2.0, 2.5) is SafetyZone.CAUTION
    assert classify((0, 0, 0), (2.5, 0, 0), 2.0, 2.5) is SafetyZone.SAFE


def test_zone_thresholds_validated():
    with pytest.raises(ValueError):
        classify((0, 0, 0), (1, 0, 0), 2.5, 2.0)


def test_escape_goal_examples():
    g, h = escape_goal((0, 0, 1), (2, 0, 1), 0.7)
    assert np.allclose(g, (3, 0, 1)) and h == 0.7
    g, _ = escape_goal((1, 1, 1), (4, 5, 1), 0.0)
    assert np.allclose(g, (4.6, 5.8, 1))


def test_escape_goal_degenerate_uses_heading():
    # stacked vertically: the unit step is all z, which the altitude rule removes
    g, _ = escape_goal((1, 1, 0), (1, 1, 2), math.pi / 2)
    assert np.allclose(g, (1, 2, 2))
    g, _ = escape_goal((1, 1, 1), (1, 1, 1), math.pi)
    assert np.allclose(g, (0, 1, 1))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=6, max_size=6), st.floats(-math.pi, math.pi))
def test_escape_goal_is_unit_step_with_altitude_kept(xs, phi):
    x_p, x_s = np.array(xs[:3]), np.array(xs[3:])
    g, theta = escape_goal(x_p, x_s, phi)
    assert g[2] == x_s[2] and theta == phi
    d = x_s - x_p
    u = d / np.linalg.norm(d) if np.linalg.norm(d) > 0 else None
    if u is not None and (x_s[0] + u[0] != x_s[0] or x_s[1] + u[1] != x_s[1]):
        assert np.array_equal(g[:2], x_s[:2] + u[:2])
    else:
        assert np.allclose(g[:2], x_s[:2] + [math.cos(phi), math.sin(phi)])


# -- guard state machine ---------------------------------------------------------------


@pytest.fixture(scope="module")
def open_box():
    g = VoxelGrid.filled((0, 0, 0), 0.2, (60, 30, 15), CellState.FREE)
    m = ExploredMap(g, g.origin, g.upper, np.zeros(g.dims, np.uint8))
    return clearance_field(m), g


def test_caution_halts_puav_only(office, open_box):
    edt, grid = open_box
    guard = CollisionGuard(2.0, 2.5)
    p = _uav(UavId.PUAV, (2, 3, 1.5), office=office)
    s = _uav(UavId.SUAV, (4.2, 3, 1.5), office=office)
    s.dispatch([np.array([9.0, 3, 1.5])])
    kinds = [e.kind for e in guard.tick(p, s, edt, grid)]
    assert kinds == ["zone", "halt"]
    assert p.halted and not s.guard_locked and s.active_path is not None


def test_critical_preempts_and_escapes(office, open_box):
    edt, grid = open_box
    guard = CollisionGuard(2.0, 2.5)
    p = _uav(UavId.PUAV, (2, 3, 1.5), office=office)
    s = _uav(UavId.SUAV, (3.5, 3, 1.5), office=office)
    s.dispatch([np.array([1.0, 5, 1.5])])
    kinds = [e.kind for e in guard.tick(p, s, edt, grid)]
    assert kinds == ["zone", "halt", "preempt", "escape"]
    assert s.guard_locked and s.hold_heading
    assert np.allclose(s.goal, (4.5, 3, 1.5))
    s.position = np.array([4.6, 3, 1.5])
    s.active_path = None
    kinds = [e.kind for e in guard.tick(p, s, edt, grid)]
    assert kinds == ["zone", "requeue", "resume"]
    assert not p.halted and not s.guard_locked


def test_escape_repeats_until_safe(office, open_box):
    edt, grid = open_box
    guard = CollisionGuard(2.0, 2.5)
    p = _uav(UavId.PUAV, (2, 3, 1.5), office=office)
    s = _uav(UavId.SUAV, (3.5, 3, 1.5), office=office)
    guard.tick(p, s, edt, grid)
    s.position = np.array([4.3, 3, 1.5])  # caution, path finished
    s.active_path = None
    kinds = [e.kind for e in guard.tick(p, s, edt, grid)]
    assert kinds == ["zone", "escape"]


def test_idle_suav_in_caution_is_moved(office, open_box):
    edt, grid = open_box
    guard = CollisionGuard(2.0, 2.5, idle_ticks_limit=3)
    p = _uav(UavId.PUAV, (2, 3, 1.5), office=office)
    s = _uav(UavId.SUAV, (4.2, 3, 1.5), office=office)
    seen = [[e.kind for e in guard.tick(p, s, edt, grid)] for _ in range(3)]
    assert seen[0] == ["zone", "halt"] and seen[1] == []
    assert seen[2] == ["preempt", "escape"]


def test_stall_without_map(office):
    guard = CollisionGuard(2.0, 2.5)
    p = _uav(UavId.PUAV, (2, 3, 1.5), office=office)
    s = _uav(UavId.SUAV, (3.0, 3, 1.5), office=office)
    assert [e.kind for e in guard.tick(p, s, None, None)][-1] == "stall"


# -- cornered retreat -----------------------------------------------------------------


def test_retreat_goal_brute_force(office):
    truth = door_world(0.9)
    m = ExploredMap.from_truth(truth)
    edt = clearance_field(m)
    x_s = np.array([3.0, 0.9, 1.5])
    x_p = np.array([3.0, 2.2, 1.5])
    g = retreat_goal(edt, truth, x_s, x_p, 0.25, 2.7)
    assert g is not None and g[2] == x_s[2]
    assert np.linalg.norm(g - x_p) >= 2.7
    # brute force: same-layer dilated-free cells connected to x_s
    free = edt >= 0.25
    from scipy import ndimage
    lab, _ = ndimage.label(free, np.ones((3, 3, 3), bool))
    s = truth.world_to_cell(x_s)
    best = None
    for ix, iy in np.ndindex(truth.dims[0], truth.dims[1]):
        c = (ix, iy, s[2])
        if lab[c] != lab[s]:
            continue
        q = truth.cell_center(c)
        q[2] = x_s[2]
        if np.linalg.norm(q - x_p) < 2.7:
            continue
        key = (np.linalg.norm(q - x_s), np.ravel_multi_index(c, truth.dims))
        if best is None or key < best[0]:
            best = (key, q)
    assert np.allclose(g, best[1])


def test_retreat_goal_none_when_nowhere_to_go(open_box):
    edt, grid = open_box
    assert retreat_goal(edt, grid, (1, 1, 1), (6, 3, 1), 0.25, 100.0) is None


# -- scripted head-on encounter ------------------------------------------------------------


def head_on(office, steps=400):
    sim = Simulation(office, MissionConfig(autonomy=False, t_max=60))
    sim.graph = update(None, ExploredMap.from_truth(sim.truth))
    sim.p.position = np.array([4.0, 12.0, 1.5])
    sim.s.position = np.array([12.0, 12.0, 1.5])
    sim.p.dispatch([np.array([16.0, 12.0, 1.5])])
    sim.s.dispatch([np.array([2.0, 12.0, 1.5])])
    sim.start()
    for _ in range(steps):
        sim.step()
    return sim


def test_scripted_head_on(office):
    sim = head_on(office)
    kinds = [e[3] for e in sim.record.events if e[2] == "guard"]
    first = {k: kinds.index(k) for k in ("halt", "preempt", "escape", "requeue", "resume")}
    assert first["halt"] < first["preempt"] < first["escape"] < first["requeue"] < first["resume"]
    ev = [e for e in sim.record.events if e[2] == "guard"]
    step_of = lambda kind, **kw: next(e[0] for e in ev if e[3] == kind
                                      and all(e[5].get(k) == v for k, v in kw.items()))
    assert step_of("halt") == step_of("zone", to="caution")
    assert step_of("escape") == step_of("zone", to="critical")
    assert sim.halt_violations == 0
    floor = sim.config.d_c - 2 * max(u.speed for u in sim.uavs) / sim.config.f_coll
    assert sim.min_distance >= floor
    # the pUAV never moved while the guard had it halted
    for row in sim.record.trajectory:
        if row[8] in ("critical", "caution"):
            assert row[9] == 0.0
