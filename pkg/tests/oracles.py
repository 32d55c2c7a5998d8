"""Independent reference computations used only by the tests.

None of these share code paths with the engines under test beyond the basic
data containers: the Fréchet oracles are discrete dynamic programs over dense
resamplings, and the graph oracles enumerate walks or search a discretised
product graph.
"""

from __future__ import annotations

import heapq
import math

import numpy as np

from mapmatch.geom import Polyline, frechet_decide, frechet_distance


def discrete_frechet(P: np.ndarray, Q: np.ndarray) -> float:
    """Classic discrete Fréchet distance, row-by-row dynamic program."""
    P = np.asarray(P, float)
    Q = np.asarray(Q, float)
    D = np.hypot(P[:, None, 0] - Q[None, :, 0], P[:, None, 1] - Q[None, :, 1])
    n, m = D.shape
    prev = np.maximum.accumulate(D[0])
    for i in range(1, n):
        cur = np.empty(m)
        cur[0] = max(prev[0], D[i, 0])
        for j in range(1, m):
            cur[j] = max(min(prev[j], prev[j - 1], cur[j - 1]), D[i, j])
        prev = cur
    return float(prev[-1])


def dense_frechet(A: Polyline, B: Polyline, spacing: float = 1e-3) -> float:
    """Discrete Fréchet distance of both curves resampled at ``spacing``."""
    return discrete_frechet(A.resample(spacing), B.resample(spacing))


def walks(g, start: int, max_edges: int, end: int | None = None):
    """Yield every walk (vertex list) from ``start`` with at most ``max_edges``
    edges, optionally only those ending at ``end``."""
    stack = [[start]]
    while stack:
        w = stack.pop()
        if end is None or w[-1] == end:
            yield w
        if len(w) - 1 < max_edges:
            for y, _, _ in g.adjacency[w[-1]]:
                stack.append(w + [y])


def walk_min_fixed(g, u, w, seg, max_edges, rel_tol=1e-9) -> float:
    """Minimum Fréchet distance to ``seg`` over enumerated ``u``-``w`` walks."""
    S = Polyline([seg.a, seg.b])
    best = math.inf
    for wk in walks(g, u, max_edges, w):
        lb = max(math.dist(g.point(wk[0]), seg.a), math.dist(g.point(wk[-1]), seg.b))
        if lb >= best:
            continue
        best = min(best, frechet_distance(Polyline(g.xy[wk]), S, rel_tol))
    return best


def walk_decide_fixed(g, u, w, seg, r, max_edges) -> bool:
    S = Polyline([seg.a, seg.b])
    return any(frechet_decide(Polyline(g.xy[wk]), S, r) for wk in walks(g, u, max_edges, w))


def walk_min_exact(g, Q: Polyline, max_edges: int, rel_tol=1e-9) -> float:
    """Minimum over all vertex-to-vertex walks with at most ``max_edges`` edges."""
    best = math.inf
    for s in range(g.n_vertices):
        if math.dist(g.point(s), Q.point(0)) >= best:
            continue
        for wk in walks(g, s, max_edges):
            if math.dist(g.point(wk[-1]), Q.point(len(Q) - 1)) >= best:
                continue
            best = min(best, frechet_distance(Polyline(g.xy[wk]), Q, rel_tol))
    return best


def discrete_map_match(g, Q: Polyline, spacing: float, endpoints: str = "vertex") -> float:
    """Bottleneck search over (subdivided-graph vertex, trajectory sample).

    The graph is subdivided so that pieces are at most ``spacing`` long and
    the trajectory is resampled at ``spacing``; the result approximates the
    continuous optimum to within about ``spacing``.
    """
    n0 = g.n_vertices
    sub = g.subdivide(spacing)
    samples = Q.resample(spacing)
    k = len(samples)
    xy = sub.xy
    D = np.hypot(xy[:, None, 0] - samples[None, :, 0], xy[:, None, 1] - samples[None, :, 1])
    starts = range(n0) if endpoints == "vertex" else range(sub.n_vertices)
    ends = set(starts)
    # states carry the previous vertex so that a walk cannot turn around at
    # a subdivision point (that would not be a walk of the original graph)
    best: dict = {}
    heap = []
    for s in starts:
        key = (s, 0, -1)
        best[key] = D[s, 0]
        heap.append((D[s, 0], s, 0, -1))
    heapq.heapify(heap)
    adj = sub.adjacency
    while heap:
        c, x, i, p = heapq.heappop(heap)
        if c > best[(x, i, p)]:
            continue
        if i == k - 1 and x in ends:
            return float(c)
        nxt = []
        if i + 1 < k:
            nxt.append((x, i + 1, p))
        for y, _, _ in adj[x]:
            if x >= n0 and y == p:
                continue
            nxt.append((y, i, x))
            if i + 1 < k:
                nxt.append((y, i + 1, x))
        for y, j, q in nxt:
            nc = max(c, D[y, j])
            if nc < best.get((y, j, q), math.inf):
                best[(y, j, q)] = nc
                heapq.heappush(heap, (nc, y, j, q))
    return math.inf


def relax_all_pairs(g) -> np.ndarray:
    """All-pairs shortest paths by repeated edge relaxation until stable."""
    n = g.n_vertices
    D = np.full((n, n), np.inf)
    np.fill_diagonal(D, 0.0)
    changed = True
    while changed:
        changed = False
        for (i, j), w in zip(g.edges.tolist(), g.edge_lengths.tolist()):
            via_i = D[:, i] + w
            via_j = D[:, j] + w
            upd_j = via_i < D[:, j]
            upd_i = via_j < D[:, i]
            if upd_j.any() or upd_i.any():
                D[upd_j, j] = via_i[upd_j]
                D[upd_i, i] = via_j[upd_i]
                changed = True
    return D
