"""Numba kernels for voxel traversal and shortest paths.

Everything here is array-in / array-out so the Python modules stay readable
and the hot loops stay compiled.
"""
from __future__ import annotations

import heapq
import math

import numpy as np
from numba import njit

UNKNOWN = 0
FREE = 1
OCCUPIED = 2

_BIG = 1e300


@njit(cache=True)
def _trace(cells, origin, res, o, d, max_range, mode, explored, observed, bit,
           hit_range, is_hit):
    """Amanatides-Woo walk from ``o`` along unit ``d``.

    mode 0 casts against ``cells`` and returns (range, hit).  mode 1 replays
    the same walk on ``explored`` up to ``hit_range``; because both modes run
    identical arithmetic, the cell entered at exactly ``hit_range`` is the
    cell the cast stopped at.
    """
    nx, ny, nz = cells.shape
    ix = int(math.floor((o[0] - origin[0]) / res))
    iy = int(math.floor((o[1] - origin[1]) / res))
    iz = int(math.floor((o[2] - origin[2]) / res))

    sx = 1 if d[0] > 0.0 else (-1 if d[0] < 0.0 else 0)
    sy = 1 if d[1] > 0.0 else (-1 if d[1] < 0.0 else 0)
    sz = 1 if d[2] > 0.0 else (-1 if d[2] < 0.0 else 0)

    if sx != 0:
        bx = origin[0] + (ix + (1 if sx > 0 else 0)) * res
        tmx = (bx - o[0]) / d[0]
        tdx = res / abs(d[0])
    else:
        tmx = _BIG
        tdx = _BIG
    if sy != 0:
        by = origin[1] + (iy + (1 if sy > 0 else 0)) * res
        tmy = (by - o[1]) / d[1]
        tdy = res / abs(d[1])
    else:
        tmy = _BIG
        tdy = _BIG
    if sz != 0:
        bz = origin[2] + (iz + (1 if sz > 0 else 0)) * res
        tmz = (bz - o[2]) / d[2]
        tdz = res / abs(d[2])
    else:
        tmz = _BIG
        tdz = _BIG

    t_enter = 0.0
    while True:
        if mode == 0:
            if cells[ix, iy, iz] == OCCUPIED:
                return t_enter, True
        else:
            # the hit cell is the one holding the hit point; an exact replay
            # reaches it at t_enter == hit_range
            if is_hit and (t_enter >= hit_range or min(tmx, tmy, tmz) > hit_range):
                explored[ix, iy, iz] = OCCUPIED
                observed[ix, iy, iz] |= bit
                return hit_range, True
            if explored[ix, iy, iz] != OCCUPIED:
                explored[ix, iy, iz] = FREE
            observed[ix, iy, iz] |= bit

        if tmx <= tmy and tmx <= tmz:
            t_enter = tmx
            ix += sx
            tmx += tdx
        elif tmy <= tmz:
            t_enter = tmy
            iy += sy
            tmy += tdy
        else:
            t_enter = tmz
            iz += sz
            tmz += tdz

        if mode == 0:
            if t_enter >= max_range:
                return max_range, False
        else:
            if t_enter >= hit_range and not is_hit:
                return hit_range, False
        if ix < 0 or iy < 0 or iz < 0 or ix >= nx or iy >= ny or iz >= nz:
            return max_range, False


@njit(cache=True)
def cast_many(cells, origin, res, o, dirs, max_range):
    n = dirs.shape[0]
    ranges = np.empty(n)
    hits = np.zeros(n, dtype=np.bool_)
    dummy = np.zeros((1, 1, 1), dtype=np.uint8)
    for k in range(n):
        r, h = _trace(cells, origin, res, o, dirs[k], max_range, 0, dummy, dummy,
                      0, 0.0, False)
        ranges[k] = r
        hits[k] = h
    return ranges, hits


@njit(cache=True)
def integrate_many(explored, observed, origin, res, o, dirs, ranges, hits, bit):
    n = dirs.shape[0]
    for k in range(n):
        _trace(explored, origin, res, o, dirs[k], ranges[k], 1, explored, observed,
               bit, ranges[k], hits[k])


@njit(cache=True)
def dijkstra_csr(indptr, indices, weights, edge_ok, node_ok, source):
    """Single-source Dijkstra over admissible nodes/edges.

    Ties: equal tentative distances pop in node-id order, and an equal-cost
    relaxation keeps the smaller predecessor id.
    """
    n = indptr.shape[0] - 1
    dist = np.full(n, np.inf)
    pred = np.full(n, -1, dtype=np.int64)
    done = np.zeros(n, dtype=np.bool_)
    if not node_ok[source]:
        return dist, pred
    dist[source] = 0.0
    heap = [(0.0, source)]
    while len(heap) > 0:
        du, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        for k in range(indptr[u], indptr[u + 1]):
            if not edge_ok[k]:
                continue
            v = indices[k]
            if not node_ok[v] or done[v]:
                continue
            nd = du + weights[k]
            if nd < dist[v] or (nd == dist[v] and u < pred[v]):
                dist[v] = nd
                pred[v] = u
                heapq.heappush(heap, (nd, v))
    return dist, pred


@njit(cache=True)
def astar_grid(free, start, goal, res):
    """26-connected A* on a boolean grid with a Euclidean heuristic.

    Returns the cell sequence as an (k, 3) array, or an empty array when the
    goal is unreachable.  Ties on f are broken by the lower flat cell index.
    """
    nx, ny, nz = free.shape
    n = nx * ny * nz
    g = np.full(n, np.inf)
    parent = np.full(n, -1, dtype=np.int64)
    closed = np.zeros(n, dtype=np.bool_)
    s = (start[0] * ny + start[1]) * nz + start[2]
    t = (goal[0] * ny + goal[1]) * nz + goal[2]
    g[s] = 0.0
    h0 = res * math.sqrt(float((start[0] - goal[0]) ** 2 + (start[1] - goal[1]) ** 2
                                + (start[2] - goal[2]) ** 2))
    heap = [(h0, s)]
    found = False
    while len(heap) > 0:
        f, u = heapq.heappop(heap)
        if closed[u]:
            continue
        closed[u] = True
        if u == t:
            found = True
            break
        ux = u // (ny * nz)
        uy = (u // nz) % ny
        uz = u % nz
        for dx in range(-1, 2):
            for dy in range(-1, 2):
                for dz in range(-1, 2):
                    if dx == 0 and dy == 0 and dz == 0:
                        continue
                    vx = ux + dx
                    vy = uy + dy
                    vz = uz + dz
                    if vx < 0 or vy < 0 or vz < 0 or vx >= nx or vy >= ny or vz >= nz:
                        continue
                    if not free[vx, vy, vz]:
                        continue
                    v = (vx * ny + vy) * nz + vz
                    if closed[v]:
                        continue
                    ng = g[u] + res * math.sqrt(float(dx * dx + dy * dy + dz * dz))
                    if ng < g[v]:
                        g[v] = ng
                        parent[v] = u
                        hv = res * math.sqrt(float((vx - goal[0]) ** 2 + (vy - goal[1]) ** 2
                                                    + (vz - goal[2]) ** 2))
                        heapq.heappush(heap, (ng + hv, v))
    if not found:
        return np.empty((0, 3), dtype=np.int64)
    count = 0
    c = t
    while c != -1:
        count += 1
        c = parent[c]
    out = np.empty((count, 3), dtype=np.int64)
    c = t
    k = count - 1
    while c != -1:
        out[k, 0] = c // (ny * nz)
        out[k, 1] = (c // nz) % ny
        out[k, 2] = c % nz
        k -= 1
        c = parent[c]
    return out


@njit(cache=True)
def segment_clearance_many(edt, origin, res, a, b):
    """Lower bound on obstacle distance along each segment a[k] -> b[k].

    Samples every res/4; between samples the bound loses half the spacing.
    Points outside the grid give -inf.
    """
    nx, ny, nz = edt.shape
    n = a.shape[0]
    out = np.empty(n)
    step = res / 4.0
    for k in range(n):
        dx = b[k, 0] - a[k, 0]
        dy = b[k, 1] - a[k, 1]
        dz = b[k, 2] - a[k, 2]
        length = math.sqrt(dx * dx + dy * dy + dz * dz)
        m = int(math.ceil(length / step)) + 1
        spacing = length / max(m - 1, 1)
        best = np.inf
        for j in range(m):
            t = j / max(m - 1, 1)
            px = a[k, 0] + dx * t
            py = a[k, 1] + dy * t
            pz = a[k, 2] + dz * t
            ix = int(math.floor((px - origin[0]) / res))
            iy = int(math.floor((py - origin[1]) / res))
            iz = int(math.floor((pz - origin[2]) / res))
            if ix < 0 or iy < 0 or iz < 0 or ix >= nx or iy >= ny or iz >= nz:
                best = -np.inf
                break
            cx = origin[0] + (ix + 0.5) * res
            cy = origin[1] + (iy + 0.5) * res
            cz = origin[2] + (iz + 0.5) * res
            off = math.sqrt((px - cx) ** 2 + (py - cy) ** 2 + (pz - cz) ** 2)
            v = edt[ix, iy, iz] - off
            if v < best:
                best = v
        out[k] = best - spacing / 2.0
    return out
