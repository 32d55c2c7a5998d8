"""Exact map matching by Dijkstra search over the free-space surface.

Two engines live here:

* :func:`match_fixed_endpoints_decide` searches paths between two given
  vertices against a single segment. A vertex's free set on a segment is one
  interval, so a state is just a vertex keyed by its lowest reachable
  parameter, and crossing an edge costs O(1) because each free-space cell is
  convex.
* :func:`match_exact_decide` handles a whole trajectory and paths that start
  and end anywhere among the vertices (or, optionally, anywhere on edges).
  A vertex's free set on the trajectory is a union of runs; states are
  ``(vertex, run)`` pairs and crossing an edge propagates through the column
  of cells of that edge against every trajectory segment.

Both minimisations bisect over the monotone decision.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.sparse.csgraph import dijkstra as _sp_dijkstra

from .geom import Polyline, Segment, bisect_threshold, dist, segment_point_interval
from .graph import GeometricGraph

__all__ = [
    "SegmentFrame",
    "match_fixed_endpoints_decide",
    "match_fixed_endpoints",
    "match_exact_decide",
    "match_exact",
    "ExactWitness",
]

_SQ_SLACK = 1e-24


class SegmentFrame:
    """Projection data of graph vertices against one query segment.

    Reused across all thresholds tried for that segment; entries are
    computed on first access so the cost stays proportional to the part of
    the graph a search actually touches.
    """

    __slots__ = ("pts", "a", "dx", "dy", "l2", "_cache")

    def __init__(self, g: GeometricGraph, a, b) -> None:
        self.pts = g.points
        self.a = (float(a[0]), float(a[1]))
        self.dx = float(b[0]) - self.a[0]
        self.dy = float(b[1]) - self.a[1]
        self.l2 = self.dx * self.dx + self.dy * self.dy
        self._cache: dict[int, tuple[float, float, float]] = {}

    def _proj(self, x: int) -> tuple[float, float, float]:
        got = self._cache.get(x)
        if got is None:
            px, py = self.pts[x]
            ax, ay = px - self.a[0], py - self.a[1]
            d2a = ax * ax + ay * ay
            if self.l2 > 0:
                cross = ax * self.dy - ay * self.dx
                got = ((ax * self.dx + ay * self.dy) / self.l2, cross * cross / self.l2, d2a)
            else:
                got = (0.0, d2a, d2a)
            self._cache[x] = got
        return got

    def interval(self, x: int, r2: float) -> Optional[tuple[float, float]]:
        t0, perp2, d2a = self._proj(x)
        if self.l2 == 0.0:
            return (0.0, 1.0) if d2a <= r2 + _SQ_SLACK * d2a else None
        rem = r2 - perp2
        if rem < 0.0:
            if rem < -_SQ_SLACK * (d2a + self.l2):
                return None
            rem = 0.0
        half = math.sqrt(rem / self.l2)
        lo = t0 - half
        hi = t0 + half
        if lo < 0.0:
            lo = 0.0
        if hi > 1.0:
            hi = 1.0
        if lo > hi:
            return None
        return (lo, hi)


def match_fixed_endpoints_decide(
    g: GeometricGraph,
    u: int,
    w: int,
    ab: Segment,
    r: float,
    *,
    frame: Optional[SegmentFrame] = None,
    return_path: bool = False,
):
    """Is there a path from ``u`` to ``w`` within Fréchet distance ``r`` of ``ab``?

    Parameters
    ----------
    g : GeometricGraph
    u, w : int
        Start and end vertices (may coincide).
    ab : Segment
        Query segment, traversed from ``a`` to ``b``.
    r : float
        Threshold; free space is closed.
    frame : SegmentFrame, optional
        Precomputed projections of ``g`` onto ``ab``.
    return_path : bool, default False
        Also return a witness vertex sequence (``None`` when infeasible).

    Returns
    -------
    bool or (bool, list of int or None)
    """
    if r < 0:
        raise ValueError("r must be non-negative")
    if frame is None:
        frame = SegmentFrame(g, ab.a, ab.b)
    r2 = r * r
    iu = frame.interval(u, r2)
    iw = frame.interval(w, r2)
    ok = iu is not None and iw is not None and iu[0] == 0.0 and iw[1] == 1.0
    if not ok:
        return (False, None) if return_path else False
    if u == w:
        # no walk can lift the reach at u beyond its own interval
        hit = iu[1] == 1.0
        return (hit, [u] if hit else None) if return_path else hit
    best = {u: 0.0}
    prev: dict[int, int] = {}
    heap = [(0.0, u)]
    adj = g.adjacency
    cache: dict[int, Optional[tuple[float, float]]] = {u: iu, w: iw}
    done: set[int] = set()
    while heap:
        t, x = heapq.heappop(heap)
        if x in done:
            continue
        done.add(x)
        if x == w:
            if not return_path:
                return True
            path = [w]
            while path[-1] != u:
                path.append(prev[path[-1]])
            return True, path[::-1]
        for y, _, _ in adj[x]:
            if y in done:
                continue
            iv = cache.get(y, False)
            if iv is False:
                iv = frame.interval(y, r2)
                cache[y] = iv
            if iv is None:
                continue
            ny = t if t > iv[0] else iv[0]
            if ny <= iv[1] and ny < best.get(y, 2.0):
                best[y] = ny
                prev[y] = x
                heapq.heappush(heap, (ny, y))
    return (False, None) if return_path else False


def _path_upper_bound(g: GeometricGraph, u: int, w: int, pts: Sequence) -> float:
    """Fréchet upper bound from the shortest ``u``-``w`` path: the largest
    distance between any path vertex and any query point."""
    if u == w:
        verts = [u]
    else:
        _, pred = _sp_dijkstra(g.csr(), directed=False, indices=u, return_predecessors=True)
        verts = [w]
        while verts[-1] != u:
            verts.append(int(pred[verts[-1]]))
    P = g.xy[verts]
    Q = np.asarray(pts, dtype=float)
    diff = P[:, None, :] - Q[None, :, :]
    return float(np.max(np.hypot(diff[..., 0], diff[..., 1])))


def match_fixed_endpoints(
    g: GeometricGraph, u: int, w: int, ab: Segment, rel_tol: float = 1e-9
) -> float:
    """Minimum Fréchet distance between ``ab`` and any ``u``-``w`` path.

    Returns ``r`` with ``opt <= r <= (1 + rel_tol) * opt``.

    Examples
    --------
    >>> g = GeometricGraph([(0, 0), (1, 1), (2, 0)], [(0, 1), (1, 2)])
    >>> round(match_fixed_endpoints(g, 0, 2, Segment((0, 0), (2, 0))), 6)
    1.0
    """
    if not rel_tol > 0:
        raise ValueError("rel_tol must be positive")
    frame = SegmentFrame(g, ab.a, ab.b)

    def decide(r: float) -> bool:
        return match_fixed_endpoints_decide(g, u, w, ab, r, frame=frame)

    lo = max(dist(g.point(u), ab.a), dist(g.point(w), ab.b))
    if decide(lo):
        return lo
    # grow the bracket geometrically; the search stays local to the segment
    hi = max(2.0 * lo, 1e-3 * ab.length, 1e-12)
    while not decide(hi):
        lo, hi = hi, 2.0 * hi
    return bisect_threshold(decide, lo, hi, rel_tol)


# full trajectories ------------------------------------------------------


class _TrajectoryFrame:
    """Free runs of each vertex against a trajectory at one threshold."""

    def __init__(self, g: GeometricGraph, Q: Polyline, r: float) -> None:
        self.g = g
        self.q = Q.points()
        self.m = len(self.q) - 1
        self.r = r
        self.r2 = r * r
        qa = Q.vertices
        # vertex-to-trajectory-vertex membership, shared by adjacent segments
        diff = g.xy[:, None, :] - qa[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        self.inside = d2 <= self.r2 * (1 + 1e-15)
        self._runs: dict[int, list[tuple[float, float]]] = {}

    def seg_interval(self, x: int, j: int) -> Optional[tuple[float, float]]:
        """Free interval of vertex ``x`` on segment ``j`` (local parameters)."""
        iv = segment_point_interval(self.g.point(x), self.q[j], self.q[j + 1], self.r)
        ins0, ins1 = self.inside[x, j], self.inside[x, j + 1]
        if iv is None:
            if ins0:
                return (0.0, 0.0) if not ins1 else (0.0, 1.0)
            if ins1:
                return (1.0, 1.0)
            return None
        lo, hi = iv
        if ins0:
            lo = 0.0
        if ins1:
            hi = 1.0
        return (lo, hi)

    def runs(self, x: int) -> list[tuple[float, float]]:
        """Maximal free runs of ``x`` in global trajectory parameters."""
        got = self._runs.get(x)
        if got is not None:
            return got
        out: list[tuple[float, float]] = []
        if self.m == 0:
            if self.inside[x, 0]:
                out.append((0.0, 0.0))
        else:
            for j in range(self.m):
                iv = self.seg_interval(x, j)
                if iv is None:
                    continue
                lo, hi = j + iv[0], j + iv[1]
                if out and out[-1][1] == lo:
                    out[-1] = (out[-1][0], hi)
                else:
                    out.append((lo, hi))
        self._runs[x] = out
        return out

    def run_of(self, x: int, tau: float) -> int:
        for k, (lo, hi) in enumerate(self.runs(x)):
            if lo <= tau <= hi:
                return k
        return -1


def _propagate_column(
    fr: _TrajectoryFrame,
    x: int,
    y: int,
    left_lo: Optional[float],
    left_hi: float,
    bottom: Optional[tuple[float, float]],
    row: int,
):
    """Push reachability through the cells of edge ``x -> y``.

    ``[left_lo, left_hi]`` (global parameters) is the reachable part of the
    boundary at ``x``; ``bottom`` an optional reachable interval (edge
    parameter) on the bottom boundary of ``row``. Returns the reachable
    intervals at ``y`` in global parameters and whether the top boundary of
    the last row was reached (a path may end inside this edge).
    """
    m = fr.m
    px, py = fr.g.point(x), fr.g.point(y)
    q = fr.q
    r = fr.r
    out: list[tuple[float, float]] = []
    ends_inside = False
    j = row
    while j < m:
        lv = None
        if left_lo is not None and left_lo <= j + 1 and left_hi >= j:
            iv = fr.seg_interval(x, j)
            if iv is not None:
                lo = max(iv[0], left_lo - j)
                hi = min(iv[1], left_hi - j)
                if lo <= hi:
                    lv = (lo, hi)
        if lv is None and bottom is None:
            if left_lo is None or left_hi <= j + 1:
                break
            j += 1
            continue
        right = fr.seg_interval(y, j)
        if right is not None:
            if bottom is None:
                lo = max(right[0], lv[0])
                if lo <= right[1]:
                    out.append((j + lo, j + right[1]))
            else:
                out.append((j + right[0], j + right[1]))
        top = segment_point_interval(q[j + 1], px, py, r)
        if top is not None:
            if lv is None:
                lo = max(top[0], bottom[0])
                top = (lo, top[1]) if lo <= top[1] else None
        if top is not None and j == m - 1:
            ends_inside = True
        bottom = top
        j += 1
    return out, ends_inside


@dataclass
class ExactWitness:
    """Debug witness of a feasible full-trajectory decision."""

    vertices: list = field(default_factory=list)


def match_exact_decide(
    g: GeometricGraph,
    Q: Polyline,
    r: float,
    *,
    endpoints: str = "vertex",
    return_path: bool = False,
):
    """Is there a path within Fréchet distance ``r`` of trajectory ``Q``?

    Parameters
    ----------
    g : GeometricGraph
    Q : Polyline
    r : float
    endpoints : {"vertex", "edge"}
        ``"vertex"`` restricts paths to start and end at vertices; ``"edge"``
        lets them start and end anywhere on an edge.
    return_path : bool
        Also return the vertex sequence of a witness (vertex mode only).

    Returns
    -------
    bool or (bool, list of int or None)
    """
    if r < 0:
        raise ValueError("r must be non-negative")
    if endpoints not in ("vertex", "edge"):
        raise ValueError("endpoints must be 'vertex' or 'edge'")
    fr = _TrajectoryFrame(g, Q, r)
    m = fr.m
    edge_mode = endpoints == "edge"
    fail = (False, None) if return_path else False

    if m == 0:
        hit = bool(fr.inside[:, 0].any())
        if not hit and edge_mode:
            q0 = fr.q[0]
            for i, j in g.edges.tolist():
                if segment_point_interval(q0, g.point(i), g.point(j), r) is not None:
                    hit = True
                    break
        if return_path:
            return hit, ([int(np.argmax(fr.inside[:, 0]))] if fr.inside[:, 0].any() else None)
        return hit

    heap: list[tuple[float, int, int]] = []
    best: dict[tuple[int, int], float] = {}
    prev: dict[tuple[int, int], Optional[tuple[int, int]]] = {}

    def push(y: int, tau: float, parent) -> None:
        k = fr.run_of(y, tau)
        if k < 0:
            return
        key = (y, k)
        if tau < best.get(key, math.inf):
            best[key] = tau
            prev[key] = parent
            heapq.heappush(heap, (tau, y, k))

    for x in np.flatnonzero(fr.inside[:, 0]).tolist():
        push(x, 0.0, None)
    if edge_mode:
        q0 = fr.q[0]
        for i, j in g.edges.tolist():
            for x, y in ((i, j), (j, i)):
                bv = segment_point_interval(q0, g.point(x), g.point(y), r)
                if bv is None:
                    continue
                reach, ends = _propagate_column(fr, x, y, None, 0.0, bv, 0)
                if ends:
                    return (True, None) if return_path else True
                for lo, _ in reach:
                    push(y, lo, None)

    adj = g.adjacency
    done: set[tuple[int, int]] = set()
    while heap:
        tau, x, k = heapq.heappop(heap)
        key = (x, k)
        if key in done:
            continue
        done.add(key)
        run_hi = fr.runs(x)[k][1]
        if run_hi >= m:
            if return_path:
                verts = [x]
                cur = prev[key]
                while cur is not None:
                    verts.append(cur[0])
                    cur = prev[cur]
                return True, verts[::-1]
            return True
        for y, _, _ in adj[x]:
            reach, ends = _propagate_column(fr, x, y, tau, run_hi, None, int(math.floor(tau)))
            if ends and edge_mode:
                return (True, None) if return_path else True
            for lo, _ in reach:
                push(y, lo, key)
    return fail


def _nearest_edge_distance(g: GeometricGraph, p) -> float:
    a = g.xy[g.edges[:, 0]]
    d = g.xy[g.edges[:, 1]] - a
    l2 = np.einsum("ij,ij->i", d, d)
    t = np.clip(np.einsum("ij,ij->i", p - a, d) / np.where(l2 > 0, l2, 1.0), 0.0, 1.0)
    q = a + t[:, None] * d
    return float(np.min(np.hypot(*(q - p).T)))


def trajectory_lower_bound(g: GeometricGraph, Q: Polyline, endpoints: str = "vertex") -> float:
    """Each trajectory vertex must be matched to a graph point; path ends
    must be matched to vertices in vertex mode."""
    lb = 0.0
    if g.n_edges:
        for p in Q.vertices:
            lb = max(lb, _nearest_edge_distance(g, p))
    if endpoints == "vertex" or g.n_edges == 0:
        for p in (Q.vertices[0], Q.vertices[-1]):
            lb = max(lb, float(np.min(np.hypot(*(g.xy - p).T))))
    return lb


def match_exact(
    g: GeometricGraph, Q: Polyline, rel_tol: float = 1e-9, *, endpoints: str = "vertex"
) -> float:
    """Minimum Fréchet distance between ``Q`` and any path of ``g``.

    Parameters
    ----------
    g : GeometricGraph
    Q : Polyline
    rel_tol : float
        Result ``r`` satisfies ``opt <= r <= (1 + rel_tol) * opt``.
    endpoints : {"vertex", "edge"}
        Where matched paths may start and end.

    Returns
    -------
    float
    """
    if not rel_tol > 0:
        raise ValueError("rel_tol must be positive")
    lo = trajectory_lower_bound(g, Q, endpoints)
    if match_exact_decide(g, Q, lo, endpoints=endpoints):
        return lo
    s = int(np.argmin(np.hypot(*(g.xy - Q.vertices[0]).T)))
    t = int(np.argmin(np.hypot(*(g.xy - Q.vertices[-1]).T)))
    hi = max(_path_upper_bound(g, s, t, Q.points()), lo)
    return bisect_threshold(
        lambda r: match_exact_decide(g, Q, r, endpoints=endpoints), lo, hi, rel_tol
    )
