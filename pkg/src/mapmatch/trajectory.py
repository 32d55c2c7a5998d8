"""(1+ε)-approximate map matching of whole trajectories.

Each trajectory vertex ``a_i`` gets a set of candidate graph points: vertex
anchors from the clustering plus evenly spaced samples on long edges near
``a_i``, the latter found by stabbing per-edge troughs
``{(x, y, z) : d((x, y), e) <= 4z <= 8|e| / eps}`` at ``(a_i, r)``.
Consecutive candidate layers are joined by arcs whose capacities are
approximate one-segment matching costs, and a layered path whose arcs all
fit under the threshold decides the query at ``r``.

Matched paths may start and end inside edges; they never reverse direction
in the interior of an edge.
"""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .geom import Polyline, Segment, dist, point_segment_distance, segment_point_interval
from .graph import GeometricGraph, GraphPoint
from .segment_index import (
    SegmentIndex,
    build_segment_index,
    candidate_vertices,
    fixed_endpoints_within,
    query_fixed_endpoints_eps,
)

__all__ = [
    "Trough",
    "TroughIndex",
    "CandidatePointSet",
    "CapacityDag",
    "MapMatchIndex",
    "MatchResult",
    "build_trough_index",
    "build_map_match_index",
    "candidate_points",
    "edge_arc_capacity",
    "map_match_query",
]

log = logging.getLogger(__name__)


# troughs -----------------------------------------------------------------


@dataclass(frozen=True)
class Trough:
    """Trough of edge ``edge`` (segment ``a b``) at parameter ``eps``."""

    edge: int
    a: tuple
    b: tuple
    eps: float

    @property
    def length(self) -> float:
        return dist(self.a, self.b)

    @property
    def z_max(self) -> float:
        return 2.0 * self.length / self.eps

    def contains(self, x: float, y: float, z: float) -> bool:
        d = point_segment_distance((x, y), Segment(self.a, self.b))
        return d <= 4.0 * z and 4.0 * z <= 8.0 * self.length / self.eps

    def bounds(self) -> tuple[float, float, float, float, float, float]:
        pad = 4.0 * self.z_max
        return (
            min(self.a[0], self.b[0]) - pad,
            min(self.a[1], self.b[1]) - pad,
            0.0,
            max(self.a[0], self.b[0]) + pad,
            max(self.a[1], self.b[1]) + pad,
            self.z_max,
        )


class TroughIndex:
    """Hierarchical 3D grid over trough bounding boxes.

    A trough lives on the level whose cell side is the smallest power of two
    not below its bounding-box extent, so it touches at most eight cells of
    that level. A stab inspects one cell per level and filters exactly.
    """

    def __init__(self, troughs: list[Trough]) -> None:
        self.troughs = troughs
        self.levels: dict[int, dict[tuple[int, int, int], list[int]]] = {}
        for k, tr in enumerate(troughs):
            x0, y0, z0, x1, y1, z1 = tr.bounds()
            ext = max(x1 - x0, y1 - y0, z1 - z0, 1e-300)
            lev = int(math.ceil(math.log2(ext)))
            side = 2.0**lev
            cells = self.levels.setdefault(lev, {})
            for ix in range(math.floor(x0 / side), math.floor(x1 / side) + 1):
                for iy in range(math.floor(y0 / side), math.floor(y1 / side) + 1):
                    for iz in range(math.floor(z0 / side), math.floor(z1 / side) + 1):
                        cells.setdefault((ix, iy, iz), []).append(k)
        self._level_list = sorted(self.levels.items())

    def __len__(self) -> int:
        return len(self.troughs)

    def stab(self, x: float, y: float, z: float) -> list[int]:
        """Edge indices of all troughs containing ``(x, y, z)``, sorted."""
        out = []
        for lev, cells in self._level_list:
            side = 2.0**lev
            hit = cells.get((math.floor(x / side), math.floor(y / side), math.floor(z / side)))
            if hit:
                for k in hit:
                    if self.troughs[k].contains(x, y, z):
                        out.append(self.troughs[k].edge)
        out.sort()
        return out

    def stab_linear(self, x: float, y: float, z: float) -> list[int]:
        return sorted(t.edge for t in self.troughs if t.contains(x, y, z))


def build_trough_index(g: GeometricGraph, eps: float) -> TroughIndex:
    """One trough per edge of ``g``.

    Raises
    ------
    ValueError
        If ``eps`` is not in ``(0, 1)``.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    troughs = [
        Trough(e, g.point(i), g.point(j), float(eps)) for e, (i, j) in enumerate(g.edges.tolist())
    ]
    return TroughIndex(troughs)


# index -----------------------------------------------------------------------


class MapMatchIndex:
    """Everything a trajectory query needs: segment index and troughs."""

    def __init__(self, seg: SegmentIndex, troughs: TroughIndex) -> None:
        self.seg = seg
        self.troughs = troughs

    @property
    def g(self) -> GeometricGraph:
        return self.seg.g

    @property
    def eps(self) -> float:
        return self.seg.eps

    @property
    def c_estimate(self) -> float:
        return self.seg.c_estimate


def build_map_match_index(
    g: GeometricGraph,
    eps: float,
    *,
    c_estimate: Optional[float] = None,
    rel_tol: float = 1e-9,
    eager: bool = False,
    seed: int = 0,
) -> MapMatchIndex:
    """Build the full query index over ``g`` for approximation ``eps``."""
    seg = build_segment_index(g, eps, c_estimate=c_estimate, rel_tol=rel_tol, eager=eager, seed=seed)
    return MapMatchIndex(seg, build_trough_index(g, eps))


# candidate points ------------------------------------------------------------


@dataclass(frozen=True)
class CandidatePointSet:
    """Candidate match points; ``kinds[i]`` is ``"vertex"`` or ``"edge"``."""

    points: tuple
    kinds: tuple

    def __len__(self) -> int:
        return len(self.points)


def _clip_to_square(p, q, cx, cy, half):
    """Parameter range of segment ``pq`` inside the axis-aligned square."""
    t0, t1 = 0.0, 1.0
    for o, d, c in ((p[0], q[0] - p[0], cx), (p[1], q[1] - p[1], cy)):
        lo, hi = c - half, c + half
        if d == 0.0:
            if o < lo or o > hi:
                return None
            continue
        u0, u1 = (lo - o) / d, (hi - o) / d
        if u0 > u1:
            u0, u1 = u1, u0
        t0, t1 = max(t0, u0), min(t1, u1)
        if t0 > t1:
            return None
    return t0, t1


def candidate_points(idx: MapMatchIndex, a, r: float, eps: float) -> CandidatePointSet:
    """Candidate points of the graph near ``a`` at scale ``r``.

    Vertex anchors cover the square of side ``2r`` to within ``eps * r / 2``;
    every edge whose trough contains ``(a, r)`` is sampled on its part inside
    the square of side ``4r`` at spacing at most ``eps * r / 2``.
    """
    if not r > 0:
        raise ValueError("r must be positive")
    g = idx.g
    seen: dict[GraphPoint, str] = {}
    for v in candidate_vertices(idx.seg, a, r, eps / 2.0):
        seen[GraphPoint.at_vertex(v)] = "vertex"
    step = eps * r / 2.0
    ax, ay = float(a[0]), float(a[1])
    for e in idx.troughs.stab(ax, ay, r):
        i, j = g.edges[e]
        p, q = g.point(int(i)), g.point(int(j))
        span = _clip_to_square(p, q, ax, ay, 2.0 * r)
        if span is None:
            continue
        t0, t1 = span
        length = float(g.edge_lengths[e])
        n = max(1, int(math.ceil((t1 - t0) * length / step)))
        for k in range(n + 1):
            t = min(1.0, max(0.0, t0 + (t1 - t0) * k / n))
            gp = GraphPoint.on_edge(g, e, t)
            seen.setdefault(gp, "edge")
    pts = sorted(seen, key=_gp_key)
    return CandidatePointSet(tuple(pts), tuple(seen[p] for p in pts))


def _gp_key(p: GraphPoint):
    return (0, p.vertex, 0.0) if p.vertex is not None else (1, p.edge, p.t)


# arc capacities --------------------------------------------------------------


def _clip_start(c, a1, a2, r: float) -> Optional[float]:
    """Earliest parameter on ``a1 a2`` within ``r`` of ``c``."""
    iv = segment_point_interval(c, a1, a2, r)
    return None if iv is None else iv[0]


def _clip_end(d, a1, a2, r: float) -> Optional[float]:
    """Latest parameter on ``a1 a2`` within ``r`` of ``d``."""
    iv = segment_point_interval(d, a1, a2, r)
    return None if iv is None else iv[1]


def _edge_param(g: GeometricGraph, p: GraphPoint, e: int) -> Optional[float]:
    """Position of ``p`` along edge ``e`` or ``None`` if it is not on ``e``."""
    if p.vertex is None:
        return p.t if p.edge == e else None
    i, j = g.edges[e]
    if p.vertex == i:
        return 0.0
    if p.vertex == j:
        return 1.0
    return None


def _shared_edge(g: GeometricGraph, b1: GraphPoint, b2: GraphPoint) -> Optional[int]:
    for p, q in ((b1, b2), (b2, b1)):
        if p.vertex is None and _edge_param(g, q, p.edge) is not None:
            return p.edge
    return None


def edge_arc_capacity(
    idx: MapMatchIndex,
    b1: GraphPoint,
    b2: GraphPoint,
    a1,
    a2,
    r: float,
    eps: float,
) -> float:
    """Approximate cost of matching ``a1 a2`` by a path from ``b1`` to ``b2``.

    If ``b1`` and ``b2`` lie on one edge the straight piece between them costs
    ``max(|b1 a1|, |b2 a2|)``. Routes through the edge endpoints ``c`` of
    ``b1`` and ``d`` of ``b2`` clip ``a1 a2`` to ``a1' a2'``, where ``a1'`` is
    the earliest point within ``r`` of ``c`` and ``a2'`` the latest within
    ``r`` of ``d``, and use the fixed-endpoint query for ``c -> d`` against
    ``a1' a2'``. Returns the minimum over all routes (``inf`` if none is
    feasible); every finite value is witnessed by a path.
    """
    g = idx.g
    p1, p2 = b1.position(g), b2.position(g)
    e1, e2 = dist(p1, a1), dist(p2, a2)
    best = math.inf
    if b1 == b2 or _shared_edge(g, b1, b2) is not None:
        best = max(e1, e2)
    if e1 > r or e2 > r:
        return best
    seg = Segment(tuple(a1), tuple(a2))
    for c in sorted(set(b1.endpoints(g))):
        pc = g.point(c)
        s1 = _clip_start(pc, seg.a, seg.b, r)
        if s1 is None:
            continue
        for d in sorted(set(b2.endpoints(g))):
            pd = g.point(d)
            s2 = _clip_end(pd, seg.a, seg.b, r)
            if s2 is None or s1 > s2:
                continue
            q1, q2 = seg.at(s1), seg.at(s2)
            floor = max(e1, e2, dist(pc, q1), dist(pd, q2))
            if floor >= best:
                continue
            val = query_fixed_endpoints_eps(idx.seg, c, d, Segment(q1, q2), eps, cap=best)
            best = min(best, max(floor, val))
    return best


# layered decision ------------------------------------------------------------


@dataclass
class CapacityDag:
    """Candidate layers for one decision at ``r`` plus lazily decided arcs.

    Nodes are ``(k, entry)``: candidate ``k`` of a layer, and for edge-interior
    candidates the endpoint through which the path entered the edge (``-1``
    when the path starts there). Leaving an interior candidate is only
    possible through the opposite endpoint, so paths never turn around inside
    an edge.
    """

    idx: MapMatchIndex
    Q: Polyline
    r: float
    eps: float
    layers: list = field(default_factory=list)

    def arcs(self, i: int):
        """All arcs between layers ``i`` and ``i + 1`` with real capacities
        (exhaustive; meant for small instances)."""
        a1, a2 = self.Q.point(i), self.Q.point(i + 1)
        for j, b1 in enumerate(self.layers[i].points):
            for k, b2 in enumerate(self.layers[i + 1].points):
                cap = edge_arc_capacity(self.idx, b1, b2, a1, a2, self.r, self.eps)
                if math.isfinite(cap):
                    yield j, k, cap

    def feasible(self, threshold: float, *, return_path: bool = False):
        """Is there a layered path with every arc decided ``<= threshold``?"""
        g = self.idx.g
        seg_idx = self.idx.seg
        r, eps = self.r, self.eps
        q = len(self.Q)
        a = [self.Q.point(i) for i in range(q)]
        pos = [[b.position(g) for b in L.points] for L in self.layers]
        near = [[dist(p, a[i]) for p in pos[i]] for i in range(q)]
        parent: list[dict] = [dict() for _ in range(q)]
        cur = {(k, -1): None for k in range(len(pos[0])) if near[0][k] <= threshold}
        parent[0] = cur
        for i in range(q - 1):
            if not cur:
                break
            a1, a2 = a[i], a[i + 1]
            seg = Segment(a1, a2)
            L1, L2 = self.layers[i].points, self.layers[i + 1].points
            nxt: dict = {}
            # routes through edge endpoints, grouped by exit vertex
            exits: dict[int, tuple] = {}
            for k, entry in cur:
                if near[i][k] > r:
                    continue
                b = L1[k]
                if b.vertex is not None:
                    outs = (b.vertex,)
                else:
                    ends = b.endpoints(g)
                    outs = ends if entry < 0 else (ends[1] if entry == ends[0] else ends[0],)
                for c in outs:
                    if c not in exits:
                        exits[c] = (k, entry)
            starts = {}
            for c in exits:
                s1 = _clip_start(g.point(c), a1, a2, r)
                if s1 is not None:
                    starts[c] = s1
            entries = defaultdict(list)
            for k, b in enumerate(L2):
                if near[i + 1][k] > r:
                    continue
                for d in set(b.endpoints(g)):
                    entries[d].append(k)
            memo: dict[int, Optional[tuple]] = {}
            for d, ks in entries.items():
                s2 = _clip_end(g.point(d), a1, a2, r)
                if s2 is None:
                    continue
                q2 = seg.at(s2)
                for c, s1 in starts.items():
                    if s1 > s2:
                        continue
                    if fixed_endpoints_within(seg_idx, c, d, Segment(seg.at(s1), q2), threshold, eps):
                        memo[d] = exits[c]
                        break
                if d in memo:
                    for k in ks:
                        b = L2[k]
                        node = (k, -1 if b.vertex is not None else d)
                        nxt.setdefault(node, memo[d])
            # straight pieces along a shared edge; per edge only the extreme
            # source in each direction matters
            targets = defaultdict(list)
            at_point = {}
            at_vertex = {}
            for k2, b2 in enumerate(L2):
                if near[i + 1][k2] > threshold:
                    continue
                if b2.vertex is None:
                    targets[b2.edge].append((b2.t, k2))
                    at_point[(b2.edge, b2.t)] = k2
                else:
                    at_vertex[b2.vertex] = k2
            up: dict = {}  # edge -> (t, state) with smallest t allowed to move towards t = 1
            down: dict = {}  # edge -> (t, state) with largest t allowed to move towards t = 0
            # vertex targets are reached only from interior sources
            up_int: dict = {}
            down_int: dict = {}
            for state in cur:
                k1, entry = state
                if near[i][k1] > threshold:
                    continue
                b1 = L1[k1]
                if b1.vertex is None:
                    e, t1 = b1.edge, b1.t
                    k2 = at_point.get((e, t1))
                    if k2 is not None:
                        nxt.setdefault((k2, entry), state)
                    ei, ej = (int(x) for x in g.edges[e])
                    if entry != ej:
                        up_int.setdefault(e, state)
                        if e not in up or t1 < up[e][0]:
                            up[e] = (t1, state)
                    if entry != ei:
                        down_int.setdefault(e, state)
                        if e not in down or t1 > down[e][0]:
                            down[e] = (t1, state)
                else:
                    v = b1.vertex
                    if v in at_vertex:
                        nxt.setdefault((at_vertex[v], -1), state)
                    for _, e, _ in g.adjacency[v]:
                        if e not in targets:
                            continue
                        if int(g.edges[e][0]) == v:
                            if e not in up or 0.0 < up[e][0]:
                                up[e] = (0.0, state)
                        elif e not in down or 1.0 > down[e][0]:
                            down[e] = (1.0, state)
            for e in sorted(set(up) | set(down)):
                ei, ej = (int(x) for x in g.edges[e])
                lo, hi = up.get(e), down.get(e)
                for t2, k2 in targets.get(e, ()):
                    if lo is not None and lo[0] < t2:
                        nxt.setdefault((k2, ei), lo[1])
                    if hi is not None and hi[0] > t2:
                        nxt.setdefault((k2, ej), hi[1])
                if e in up_int and ej in at_vertex:
                    nxt.setdefault((at_vertex[ej], -1), up_int[e])
                if e in down_int and ei in at_vertex:
                    nxt.setdefault((at_vertex[ei], -1), down_int[e])
            parent[i + 1] = nxt
            cur = nxt
        ok = bool(cur)
        if not return_path:
            return ok
        if not ok:
            return False, None
        node = min(cur)
        path = [node]
        for i in range(q - 1, 0, -1):
            node = parent[i][node]
            path.append(node)
        path.reverse()
        return True, [self.layers[i].points[k] for i, (k, _) in enumerate(path)]


def build_capacity_dag(idx: MapMatchIndex, Q: Polyline, r: float, eps: float) -> CapacityDag:
    """Candidate layers for every trajectory vertex at scale ``r``."""
    dag = CapacityDag(idx, Q, r, eps)
    dag.layers = [candidate_points(idx, Q.point(i), r, eps) for i in range(len(Q))]
    return dag


# query -----------------------------------------------------------------------


@dataclass
class MatchResult:
    """Answer of a trajectory query with debugging extras."""

    value: float
    decisions: list = field(default_factory=list)
    layers: Optional[list] = None
    path: Optional[list] = None


def _decide(idx: MapMatchIndex, Q: Polyline, r: float, eps_p: float, want_path: bool):
    dag = build_capacity_dag(idx, Q, r, eps_p)
    if any(len(L) == 0 for L in dag.layers):
        return "b", dag, None
    got = dag.feasible(r, return_path=want_path)
    ok, path = got if want_path else (got, None)
    if ok:
        return "a", dag, path
    got = dag.feasible((1 + eps_p) ** 2 * r, return_path=want_path)
    ok, path = got if want_path else (got, None)
    if ok:
        return "c", dag, path
    return "b", dag, None


def map_match_query(
    idx: MapMatchIndex,
    Q: Polyline,
    eps: Optional[float] = None,
    rel_tol: float = 1e-6,
    *,
    details: bool = False,
):
    """(1+eps)-approximate Fréchet distance from ``Q`` to its best graph path.

    Bisection over a three-way decision at ``r`` with ``ε' = eps / 9``: a
    layered path at threshold ``r`` (feasible, witness ``r``), one only at
    ``(1+ε')²r`` (feasible, witness ``(1+ε')²r``), or none (infeasible).
    The smallest witness seen is returned.

    Parameters
    ----------
    idx : MapMatchIndex
    Q : Polyline
        Non-empty trajectory.
    eps : float, optional
        Defaults to the index's ``eps``.
    rel_tol : float
        Bisection tolerance.
    details : bool
        Return a :class:`MatchResult` with the decision trace, the candidate
        layers and a feasible layered path of the best decision.
    """
    eps = idx.eps if eps is None else float(eps)
    if not rel_tol > 0:
        raise ValueError("rel_tol must be positive")
    if len(Q) == 0:
        raise ValueError("empty trajectory")
    eps_p = eps / 9.0
    grow = (1 + eps_p) ** 2
    trace: list = []
    best = {"value": math.inf, "dag": None, "path": None}

    def feasible(r: float) -> bool:
        case, dag, path = _decide(idx, Q, r, eps_p, details)
        trace.append((r, case))
        if case == "b":
            return False
        val = r if case == "a" else grow * r
        if val < best["value"]:
            best.update(value=val, dag=dag, path=path)
        return True

    loc = idx.seg.locator
    lo = max(loc.nearest_edge_distance(p) for p in Q.vertices) / 3.0
    scale = max(1.0, float(np.ptp(Q.vertices, axis=0).max()))
    r = max(lo, 1e-9 * scale)
    while not feasible(r):
        lo, r = r, 2.0 * r
    hi = r
    while hi > (1 + rel_tol) * lo and hi - lo > 1e-12 * scale:
        mid = math.sqrt(lo * hi) if lo > 0 else 0.5 * hi
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    if not details:
        return best["value"]
    dag = best["dag"]
    return MatchResult(best["value"], trace, dag.layers if dag else None, best["path"])
