"""Goal allocation for the two-UAV team: greedy baseline and min-cost flow."""
from __future__ import annotations

import enum
import heapq
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from hetex.errors import InfeasibleNetwork
from hetex.frontier_finder import Poi
from hetex.occupancy_map import UavId
from hetex.sphere_map import SphereGraph, plan

MILLI = 1000


class Strategy(str, enum.Enum):
    GREEDY = "greedy"
    MCF = "mcf"


@dataclass(frozen=True)
class AllocParams:
    alpha: float = 1.0
    beta: float = 0.5
    n_arcs: int = 5
    c_x: float = 1000.0  # 1e6 milliunits
    safety_weight: float = 0.2


@dataclass(frozen=True)
class CandidateCost:
    poi: Poi
    heuristic_cost: float
    for_uav: UavId


@dataclass
class Assignment:
    goal_p: Poi | None  # None means Stay
    goal_s: Poi | None
    total_cost: float
    n_arcs: int = 0

    def goal(self, uav: UavId) -> Poi | None:
        return self.goal_p if uav is UavId.PUAV else self.goal_s


def wrap_angle(a: float) -> float:
    """Wrap into (-pi, pi]."""
    return math.pi - ((math.pi - a) % (2 * math.pi))


def greedy_cost_p(x_p, g) -> float:
    g = getattr(g, "xyz", g)
    return float(np.linalg.norm(np.asarray(x_p, float) - np.asarray(g, float)))


def greedy_cost_s(x_s, phi_s: float, g, alpha: float, beta: float) -> float:
    if alpha < 0 or beta < 0:
        raise ValueError("alpha and beta must be non-negative")
    g = np.asarray(getattr(g, "xyz", g), float)
    x_s = np.asarray(x_s, float)
    delta = g - x_s
    dist = float(np.linalg.norm(delta))
    if delta[0] == 0.0 and delta[1] == 0.0:
        turn = 0.0
    else:
        theta = math.atan2(delta[1], delta[0])
        turn = abs(wrap_angle(phi_s - theta))
    return alpha * dist + beta * turn


def _queue(pois: Sequence[Poi], cost_fn) -> list[tuple[float, tuple, int]]:
    """Priority order: cost, then lexicographic position, then input order."""
    return sorted((cost_fn(p), p.position, k) for k, p in enumerate(pois))


def to_milli(c: float) -> int:
    return int(round(c * MILLI))


# -- flow network ------------------------------------------------------------

SOURCE, SINK, NODE_P, NODE_S, SELF_P, SELF_S = range(6)
POI_BASE = 6


@dataclass
class Arc:
    tail: int
    head: int
    capacity: int
    cost: int  # milliunits
    flow: int = 0


@dataclass
class FlowNetwork:
    pois: list[Poi]
    arcs: list[Arc] = field(default_factory=list)
    candidates: list[CandidateCost] = field(default_factory=list)

    @property
    def n_nodes(self) -> int:
        return POI_BASE + len(self.pois)

    def balance(self, n: int) -> int:
        return 2 if n == SOURCE else (-2 if n == SINK else 0)

    def add_arc(self, tail: int, head: int, cost: int, capacity: int = 1) -> None:
        self.arcs.append(Arc(tail, head, capacity, cost))

    def uav_arcs(self) -> list[Arc]:
        return [a for a in self.arcs if a.tail in (NODE_P, NODE_S)]


def _accessible_arcs(pois, queue, start, uav_radius, graph, params, limit):
    """Pop ``queue`` until ``limit`` accessible POIs were found."""
    out = []
    if graph is None:
        return out
    for c, _, k in queue:
        if len(out) >= limit:
            break
        path = plan(graph, start, pois[k].xyz, uav_radius, params.safety_weight)
        if path is not None:
            out.append((k, c + path.waypoint_count))
    return out


def build_network(pois: Sequence[Poi], x_p, x_s, phi_s: float, graph: SphereGraph | None,
                  s_p: float, s_s: float, params: AllocParams = AllocParams()) -> FlowNetwork:
    if params.n_arcs < 1:
        raise ValueError("n_arcs must be >= 1")
    pois = list(pois)
    net = FlowNetwork(pois)
    q_p = _queue(pois, lambda p: greedy_cost_p(x_p, p))
    q_s = _queue(pois, lambda p: greedy_cost_s(x_s, phi_s, p, params.alpha, params.beta))
    arcs_p = _accessible_arcs(pois, q_p, x_p, s_p, graph, params, params.n_arcs)
    arcs_s = _accessible_arcs(pois, q_s, x_s, s_s, graph, params, params.n_arcs)
    c_x = to_milli(params.c_x)
    worst = max([to_milli(c) for _, c in arcs_p + arcs_s], default=0)
    if c_x <= worst:
        raise ValueError(f"self-arc cost {params.c_x} must exceed every arc cost ({worst / MILLI})")

    net.add_arc(SOURCE, NODE_P, 0)
    net.add_arc(SOURCE, NODE_S, 0)
    for k, c in arcs_p:
        net.add_arc(NODE_P, POI_BASE + k, to_milli(c))
        net.candidates.append(CandidateCost(pois[k], c, UavId.PUAV))
    net.add_arc(NODE_P, SELF_P, c_x)
    for k, c in arcs_s:
        net.add_arc(NODE_S, POI_BASE + k, to_milli(c))
        net.candidates.append(CandidateCost(pois[k], c, UavId.SUAV))
    net.add_arc(NODE_S, SELF_S, c_x)
    for k in range(len(pois)):
        net.add_arc(POI_BASE + k, SINK, 0)
    net.add_arc(SELF_P, SINK, 0)
    net.add_arc(SELF_S, SINK, 0)
    return net


def solve_mcf(net: FlowNetwork) -> Assignment:
    """Successive shortest augmenting paths with Johnson potentials.

    Every arc cost is a non-negative integer, so the zero potential is valid
    at the start and all arithmetic is exact.
    """
    n = net.n_nodes
    # residual arcs: 2k forward, 2k+1 backward
    head, cap, cost = [], [], []
    out: list[list[int]] = [[] for _ in range(n)]
    for a in net.arcs:
        a.flow = 0
        for t, h, c, w in ((a.tail, a.head, a.capacity, a.cost), (a.head, a.tail, 0, -a.cost)):
            out[t].append(len(head))
            head.append(h)
            cap.append(c)
            cost.append(w)
    pot = [0] * n
    demand = net.balance(SOURCE)
    for _ in range(demand):
        dist = [None] * n
        via = [-1] * n
        dist[SOURCE] = 0
        heap = [(0, -1, SOURCE)]
        done = [False] * n
        while heap:
            d, _, u = heapq.heappop(heap)
            if done[u]:
                continue
            done[u] = True
            for e in out[u]:
                if cap[e] <= 0:
                    continue
                v = head[e]
                if done[v]:
                    continue
                nd = d + cost[e] + pot[u] - pot[v]
                if dist[v] is None or nd < dist[v] or (nd == dist[v] and (e >> 1) < (via[v] >> 1)):
                    dist[v] = nd
                    via[v] = e
                    heapq.heappush(heap, (nd, e >> 1, v))
        if dist[SINK] is None:
            raise InfeasibleNetwork("no augmenting path; self-arcs missing?")
        for v in range(n):
            if dist[v] is not None:
                pot[v] += dist[v]
        v = SINK
        while v != SOURCE:
            e = via[v]
            cap[e] -= 1
            cap[e ^ 1] += 1
            v = head[e ^ 1]

    total = 0
    goals: dict[int, Poi | None] = {NODE_P: None, NODE_S: None}
    for k, a in enumerate(net.arcs):
        a.flow = a.capacity - cap[2 * k]
        total += a.flow * a.cost
        if a.flow and a.tail in goals:
            goals[a.tail] = net.pois[a.head - POI_BASE] if a.head >= POI_BASE else None
    return Assignment(goals[NODE_P], goals[NODE_S], total / MILLI,
                      n_arcs=len(net.uav_arcs()))


def greedy_assign(pois: Sequence[Poi], x_p, x_s, phi_s: float, graph: SphereGraph | None,
                  s_p: float, s_s: float, params: AllocParams = AllocParams()) -> Assignment:
    """pUAV takes its closest accessible POI, then the sUAV picks from the rest."""
    pois = list(pois)
    q_p = _queue(pois, lambda p: greedy_cost_p(x_p, p))
    first_p = _accessible_arcs(pois, q_p, x_p, s_p, graph, params, 1)
    taken = first_p[0][0] if first_p else None
    q_s = [item for item in _queue(pois, lambda p: greedy_cost_s(x_s, phi_s, p, params.alpha, params.beta))
           if item[2] != taken]
    first_s = _accessible_arcs(pois, q_s, x_s, s_s, graph, params, 1)
    total = 0
    goal_p = goal_s = None
    for found, setter in ((first_p, "p"), (first_s, "s")):
        if found:
            k, c = found[0]
            total += to_milli(c)
            if setter == "p":
                goal_p = pois[k]
            else:
                goal_s = pois[k]
        else:
            total += to_milli(params.c_x)
    return Assignment(goal_p, goal_s, total / MILLI, n_arcs=len(first_p) + len(first_s))


def assign(strategy: Strategy | str, pois: Sequence[Poi], x_p, x_s, phi_s: float,
           graph: SphereGraph | None, s_p: float, s_s: float,
           params: AllocParams = AllocParams()) -> Assignment:
    strategy = Strategy(strategy)
    if strategy is Strategy.GREEDY:
        return greedy_assign(pois, x_p, x_s, phi_s, graph, s_p, s_s, params)
    net = build_network(pois, x_p, x_s, phi_s, graph, s_p, s_s, params)
    return solve_mcf(net)
