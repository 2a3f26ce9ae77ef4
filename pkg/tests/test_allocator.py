from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from hetex.allocator import (NODE_P, NODE_S, POI_BASE, SELF_P, SELF_S, SINK, SOURCE, AllocParams,
                             FlowNetwork, Strategy, assign, build_network, greedy_assign,
                             greedy_cost_p, greedy_cost_s, solve_mcf, to_milli, wrap_angle)
from hetex.frontier_finder import Poi, PoiSource
from hetex.occupancy_map import UavId
from hetex.sphere_map import update
from hetex.voxel_world import CellState

C_X = 1000.0


def _poi(x, y=0.0, z=1.0, k=0) -> Poi:
    return Poi((float(x), float(y), float(z)), PoiSource.CENTROID, k, (k, 0, 0))


def manual_network(n: int, costs_p: dict[int, float], costs_s: dict[int, float],
                   c_x: float = C_X) -> FlowNetwork:
    net = FlowNetwork([_poi(k, k=k) for k in range(n)])
    net.add_arc(SOURCE, NODE_P, 0)
    net.add_arc(SOURCE, NODE_S, 0)
    for k, c in costs_p.items():
        net.add_arc(NODE_P, POI_BASE + k, to_milli(c))
    net.add_arc(NODE_P, SELF_P, to_milli(c_x))
    for k, c in costs_s.items():
        net.add_arc(NODE_S, POI_BASE + k, to_milli(c))
    net.add_arc(NODE_S, SELF_S, to_milli(c_x))
    for k in range(n):
        net.add_arc(POI_BASE + k, SINK, 0)
    net.add_arc(SELF_P, SINK, 0)
    net.add_arc(SELF_S, SINK, 0)
    return net


def enumerate_best(costs_p: dict[int, float], costs_s: dict[int, float], c_x: float = C_X) -> int:
    """Exhaustive optimum in milliunits over all distinct-goal pairs."""
    opts_p = [(k, to_milli(c)) for k, c in costs_p.items()] + [(None, to_milli(c_x))]
    opts_s = [(k, to_milli(c)) for k, c in costs_s.items()] + [(None, to_milli(c_x))]
    return min(cp + cs for (kp, cp), (ks, cs) in itertools.product(opts_p, opts_s)
               if kp is None or kp != ks)


# -- costs ---------------------------------------------------------------------


def test_wrap_angle():
    assert wrap_angle(math.pi) == pytest.approx(math.pi)
    assert wrap_angle(-math.pi) == pytest.approx(math.pi)
    assert wrap_angle(3 * math.pi / 2) == pytest.approx(-math.pi / 2)
    assert wrap_angle(0.0) == 0.0


def test_greedy_costs():
    assert greedy_cost_p((0, 0, 0), (3, 4, 0)) == 5.0
    assert greedy_cost_s((0, 0, 0), 0.0, (2, 0, 0), 1.0, 0.5) == 2.0
    assert greedy_cost_s((0, 0, 0), 0.0, (0, 2, 0), 1.0, 0.5) == pytest.approx(2 + 0.5 * math.pi / 2)
    # directly above: no bearing, no turn penalty
    assert greedy_cost_s((0, 0, 0), 1.0, (0, 0, 2), 1.0, 0.5) == 2.0


def test_turn_cost_wraps_across_pi():
    # heading pi - 0.1 facing a target at bearing -pi + 0.1: a 0.2 rad turn
    target = (math.cos(-math.pi + 0.1), math.sin(-math.pi + 0.1), 0.0)
    c = greedy_cost_s((0, 0, 0), math.pi - 0.1, target, 0.0, 1.0)
    assert c == pytest.approx(0.2, abs=1e-12)


def test_negative_weights_rejected():
    with pytest.raises(ValueError):
        greedy_cost_s((0, 0, 0), 0.0, (1, 0, 0), -1.0, 0.5)


# -- min-cost flow ------------------------------------------------------------------


def test_two_by_two_picks_cheapest_pair():
    a = solve_mcf(manual_network(2, {0: 1.0, 1: 2.0}, {0: 2.0, 1: 2.0}))
    assert a.total_cost == 3.0
    assert a.goal_p.cluster_id == 0 and a.goal_s.cluster_id == 1


def test_cross_assignment_beats_greedy_choice():
    # pUAV's favourite is also the sUAV's only cheap option
    costs_p = {0: 1.0, 1: 2.0}
    costs_s = {0: 1.0, 1: 5.0}
    a = solve_mcf(manual_network(2, costs_p, costs_s))
    assert a.total_cost == 3.0
    assert (a.goal_p.cluster_id, a.goal_s.cluster_id) == (1, 0)
    costs_p = {0: 1.0, 1: 3.0}
    costs_s = {0: 1.0, 1: 5.0}
    a = solve_mcf(manual_network(2, costs_p, costs_s))
    assert a.total_cost == 4.0
    # greedy would take (0, 1) for 6
    assert enumerate_best(costs_p, costs_s) == 4000


def test_no_arcs_means_both_stay():
    a = solve_mcf(manual_network(0, {}, {}))
    assert a.goal_p is None and a.goal_s is None
    assert a.total_cost == 2 * C_X


def test_single_poi_goes_to_cheaper_uav():
    a = solve_mcf(manual_network(1, {0: 4.0}, {0: 3.0}))
    assert a.goal_p is None and a.goal_s.cluster_id == 0
    assert a.total_cost == C_X + 3.0


def test_flow_is_conserved():
    net = manual_network(3, {0: 1.0, 2: 4.0}, {0: 2.0, 1: 1.5})
    solve_mcf(net)
    net_flow = np.zeros(net.n_nodes, int)
    for arc in net.arcs:
        assert 0 <= arc.flow <= arc.capacity
        net_flow[arc.tail] += arc.flow
        net_flow[arc.head] -= arc.flow
    assert [int(v) for v in net_flow] == [net.balance(n) for n in range(net.n_nodes)]


def test_500_random_instances_match_enumeration():
    rng = np.random.default_rng(0)
    for _ in range(500):
        n = int(rng.integers(0, 9))
        def pick():
            ks = [k for k in range(n) if rng.random() < 0.7][:5]
            return {k: round(float(rng.uniform(0, 30)), 3) for k in ks}
        costs_p, costs_s = pick(), pick()
        a = solve_mcf(manual_network(n, costs_p, costs_s))
        assert to_milli(a.total_cost) == enumerate_best(costs_p, costs_s)
        if a.goal_p is not None and a.goal_s is not None:
            assert a.goal_p != a.goal_s


# -- on a real map -------------------------------------------------------------------


@pytest.fixture(scope="module")
def graph(office_partial):
    return update(None, office_partial)


def _random_pois(m, rng, n):
    free = np.argwhere(m.cells == CellState.FREE)
    idx = free[rng.choice(len(free), n, replace=False)]
    return [Poi(tuple(float(v) for v in m.grid.cell_center(c)), PoiSource.CENTROID, k,
                tuple(int(v) for v in c)) for k, c in enumerate(idx)]


X_P = np.array([3.0, 3.0, 1.5])
X_S = np.array([9.0, 12.0, 1.5])


def test_network_size_bounds(office_partial, graph):
    rng = np.random.default_rng(1)
    pois = _random_pois(office_partial, rng, 30)
    params = AllocParams(n_arcs=5)
    net = build_network(pois, X_P, X_S, 0.0, graph, 0.45, 0.25, params)
    per_uav = {NODE_P: 0, NODE_S: 0}
    for a in net.uav_arcs():
        if a.head >= POI_BASE:
            per_uav[a.tail] += 1
    assert all(0 <= v <= 5 for v in per_uav.values())
    assert len(net.arcs) == 2 + sum(per_uav.values()) + 2 + len(pois) + 2
    # every candidate arc cost is the heuristic plus the planned waypoint count
    for c in net.candidates:
        x = X_P if c.for_uav is UavId.PUAV else X_S
        h = greedy_cost_p(x, c.poi) if c.for_uav is UavId.PUAV else greedy_cost_s(x, 0.0, c.poi, 1.0, 0.5)
        extra = c.heuristic_cost - h
        assert extra == pytest.approx(round(extra), abs=1e-9) and round(extra) >= 1


def test_self_arc_must_dominate(office_partial, graph):
    pois = _random_pois(office_partial, np.random.default_rng(2), 10)
    with pytest.raises(ValueError):
        build_network(pois, X_P, X_S, 0.0, graph, 0.45, 0.25, AllocParams(c_x=0.5))


def test_no_graph_means_stay():
    a = assign("mcf", [_poi(1)], X_P, X_S, 0.0, None, 0.45, 0.25)
    assert a.goal_p is None and a.goal_s is None
    g = assign(Strategy.GREEDY, [_poi(1)], X_P, X_S, 0.0, None, 0.45, 0.25)
    assert g.total_cost == 2 * C_X


@settings(max_examples=25, deadline=None, suppress_health_check=list(HealthCheck))
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 12), phi=st.floats(-3.1, 3.1))
def test_mcf_never_worse_than_greedy(seed, n, phi, office_partial, graph):
    pois = _random_pois(office_partial, np.random.default_rng(seed), n)
    m = assign("mcf", pois, X_P, X_S, phi, graph, 0.45, 0.25)
    g = greedy_assign(pois, X_P, X_S, phi, graph, 0.45, 0.25)
    assert m.total_cost <= g.total_cost + 1e-9
    if m.goal_p is not None and m.goal_s is not None:
        assert m.goal_p != m.goal_s
    if g.goal_p is not None and g.goal_s is not None:
        assert g.goal_p != g.goal_s


def test_allocation_is_deterministic(office_partial, graph):
    pois = _random_pois(office_partial, np.random.default_rng(3), 15)
    a = assign("mcf", pois, X_P, X_S, 0.3, graph, 0.45, 0.25)
    b = assign("mcf", list(pois), X_P, X_S, 0.3, graph, 0.45, 0.25)
    assert a == b
