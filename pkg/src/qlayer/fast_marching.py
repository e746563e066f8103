"""Fast marching for geodesic distance on a sampled surface.

The parameter grid is embedded in R^3 by the chart and every grid square
contributes the four triangles spanned by three of its corners.  Trial values
are updated with the semi-Lagrangian triangle rule: the new distance at C is
the minimum over the opposite edge AB of the linearly interpolated distance
plus the straight distance to C.  Nodes within two grid steps of the source
start from their chord length.
"""

from __future__ import annotations

import heapq
import math

import numpy as np

# (di, dj) neighbours in counter-clockwise order around a node.
_RING = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)]


def _triangles_for(offset):
    """Neighbour pairs (A, B) that form a triangle with the centre and contain ``offset``."""
    k = _RING.index(offset)
    pairs = [(_RING[k], _RING[(k + 1) % 8]), (_RING[(k - 1) % 8], _RING[k])]
    if offset[0] == 0 or offset[1] == 0:
        pairs.append((_RING[k], _RING[(k + 2) % 8]))
        pairs.append((_RING[(k - 2) % 8], _RING[k]))
    return pairs


_TRI_BY_OFFSET = {off: _triangles_for(off) for off in _RING}


def segment_update(ta: float, tb: float, a, b, c) -> float:
    """min over t in [0, 1] of (1-t) ta + t tb + |(1-t) a + t b - c|."""
    dx, dy, dz = a[0] - c[0], a[1] - c[1], a[2] - c[2]
    ex, ey, ez = b[0] - a[0], b[1] - a[1], b[2] - a[2]
    dd = dx * dx + dy * dy + dz * dz
    ee = ex * ex + ey * ey + ez * ez
    de = dx * ex + dy * ey + dz * ez
    best = min(ta + math.sqrt(dd), tb + math.sqrt(dd + 2 * de + ee))
    delta = tb - ta
    if ee > 0 and delta * delta < ee:
        perp2 = max(dd - de * de / ee, 0.0)
        tau = -delta * math.sqrt(perp2 / (ee * (ee - delta * delta)))
        t = tau - de / ee
        if 0.0 < t < 1.0:
            val = ta + t * delta + math.sqrt(ee * tau * tau + perp2)
            if val < best:
                best = val
    return best


def march_grid(points: np.ndarray, source: tuple[int, int], init_radius: int = 2) -> np.ndarray:
    """Geodesic distance from ``source`` over an embedded grid ``points[i, j] -> R^3``."""
    ni, nj = points.shape[:2]
    P = points.tolist()
    T = [[math.inf] * nj for _ in range(ni)]
    accepted = [[False] * nj for _ in range(ni)]
    heap: list[tuple[float, int, int]] = []
    si, sj = source
    src = P[si][sj]
    for i in range(max(0, si - init_radius), min(ni, si + init_radius + 1)):
        for j in range(max(0, sj - init_radius), min(nj, sj + init_radius + 1)):
            p = P[i][j]
            T[i][j] = math.dist(p, src)
            accepted[i][j] = True
    for i in range(max(0, si - init_radius - 1), min(ni, si + init_radius + 2)):
        for j in range(max(0, sj - init_radius - 1), min(nj, sj + init_radius + 2)):
            if accepted[i][j]:
                continue
            val = _full_update(i, j, T, accepted, P, ni, nj)
            if val < T[i][j]:
                T[i][j] = val
                heapq.heappush(heap, (val, i, j))

    while heap:
        t, i, j = heapq.heappop(heap)
        if accepted[i][j] or t > T[i][j]:
            continue
        accepted[i][j] = True
        for di, dj in _RING:
            ci, cj = i + di, j + dj
            if not (0 <= ci < ni and 0 <= cj < nj) or accepted[ci][cj]:
                continue
            off = (-di, -dj)
            c = P[ci][cj]
            best = t + math.dist(P[i][j], c)
            for (ai, aj), (bi, bj) in _TRI_BY_OFFSET[off]:
                ai, aj, bi, bj = ci + ai, cj + aj, ci + bi, cj + bj
                if not (0 <= ai < ni and 0 <= aj < nj and 0 <= bi < ni and 0 <= bj < nj):
                    continue
                if accepted[ai][aj] and accepted[bi][bj]:
                    val = segment_update(T[ai][aj], T[bi][bj], P[ai][aj], P[bi][bj], c)
                    if val < best:
                        best = val
            if best < T[ci][cj]:
                T[ci][cj] = best
                heapq.heappush(heap, (best, ci, cj))
    return np.asarray(T)


def _full_update(ci, cj, T, accepted, P, ni, nj) -> float:
    c = P[ci][cj]
    best = math.inf
    for k, (di, dj) in enumerate(_RING):
        ai, aj = ci + di, cj + dj
        if not (0 <= ai < ni and 0 <= aj < nj) or not accepted[ai][aj]:
            continue
        best = min(best, T[ai][aj] + math.dist(P[ai][aj], c))
        for (xi, xj), (yi, yj) in _TRI_BY_OFFSET[(di, dj)]:
            xi, xj, yi, yj = ci + xi, cj + xj, ci + yi, cj + yj
            if 0 <= xi < ni and 0 <= xj < nj and 0 <= yi < ni and 0 <= yj < nj \
                    and accepted[xi][xj] and accepted[yi][yj]:
                best = min(best, segment_update(T[xi][xj], T[yi][yj], P[xi][xj], P[yi][yj], c))
    return best
