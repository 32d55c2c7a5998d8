"""Transit vertices, straightest-path distance table and 3-approximate queries.

For a semi-separated pair ``(A, B)`` a unit-capacity minimum cut between the
two sides yields a small vertex set ``C`` that every ``A``-``B`` path must
visit. The minimum Fréchet distance between a path ``u -> w`` and the segment
``uw`` is stored for each endpoint ``u`` in ``A ∪ B`` and ``w`` in ``C``; a
query ``(u, v)`` then combines two stored values through the best ``w``.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Optional

from .freespace import match_fixed_endpoints
from .geom import Segment, closest_param_on_segment, dist
from .graph import GeometricGraph
from .sspd import SspdIndex, SspdPair, build_sspd

__all__ = [
    "TransitSet",
    "TransitDistanceTable",
    "TransitIndex",
    "compute_transit_vertices",
    "precompute_transit_distances",
    "build_transit_index",
    "straightest_path_query",
    "straightest_path_query_segment",
    "separates",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TransitSet:
    """Cut vertices ``C`` of one SSPD pair.

    ``flow`` is the max-flow value found; ``flagged`` marks a pair whose flow
    exceeded the cap given to the solver (the packedness estimate was low).
    """

    pair_id: int
    cut_vertices: tuple
    flow: int
    flagged: bool = False


def _unit_max_flow(g: GeometricGraph, A: Iterable[int], B: Iterable[int], cap: Optional[int]):
    """Ford–Fulkerson with BFS augmenting paths on unit-capacity undirected edges.

    Returns ``(flow, source_side)`` where ``source_side`` is the set of
    vertices reachable from ``A`` in the final residual graph, or ``None``
    when the flow exceeded ``cap`` and the search stopped early.
    """
    A = set(A)
    B = set(B)
    if A & B:
        raise ValueError("pair sides must be disjoint")
    n = g.n_vertices
    # f[e] = net flow along edge e from edges[e, 0] to edges[e, 1]
    f = [0] * g.n_edges
    ends = g.edges.tolist()
    adj = [[(y, e) for y, e, _ in g.adjacency[x]] for x in range(n)]
    flow = 0
    while True:
        parent: dict[int, tuple[int, int]] = {}
        seen = bytearray(n)
        dq = deque()
        for a in A:
            seen[a] = 1
            dq.append(a)
        hit = -1
        while dq and hit < 0:
            x = dq.popleft()
            for y, e in adj[x]:
                if seen[y]:
                    continue
                fwd = ends[e][0] == x
                if (1 - f[e] if fwd else 1 + f[e]) <= 0:
                    continue
                seen[y] = 1
                parent[y] = (x, e)
                if y in B:
                    hit = y
                    break
                dq.append(y)
        if hit < 0:
            return flow, {i for i in range(n) if seen[i]}
        y = hit
        while y not in A:
            x, e = parent[y]
            f[e] += 1 if ends[e][0] == x else -1
            y = x
        flow += 1
        if cap is not None and flow > cap:
            return flow, None


def compute_transit_vertices(
    g: GeometricGraph, pair: SspdPair, *, pair_id: int = -1, flow_cap: Optional[int] = None
) -> TransitSet:
    """Transit vertices of ``pair`` from a unit-capacity minimum cut.

    Each cut edge contributes its endpoint on the sink side of the residual
    cut. With ``flow_cap`` set, the search stops once the flow exceeds it and
    the result is flagged with an empty vertex list.

    Examples
    --------
    >>> g = GeometricGraph([(0, 0), (1, 0), (2, 0)], [(0, 1), (1, 2)])
    >>> compute_transit_vertices(g, SspdPair((0,), (2,))).cut_vertices
    (1,)
    """
    flow, side = _unit_max_flow(g, pair.side_a, pair.side_b, flow_cap)
    if side is None:
        return TransitSet(pair_id, (), flow, True)
    cut = set()
    for i, j in g.edges.tolist():
        if (i in side) != (j in side):
            cut.add(j if i in side else i)
    return TransitSet(pair_id, tuple(sorted(cut)), flow, False)


def separates(g: GeometricGraph, A: Iterable[int], B: Iterable[int], C: Iterable[int]) -> bool:
    """True when deleting every edge incident to ``C`` leaves no ``A``-``B`` path."""
    C = set(C)
    B = set(B)
    seen = set(A)
    stack = list(seen)
    while stack:
        x = stack.pop()
        if x in B:
            return False
        if x in C:
            continue
        for y, _, _ in g.adjacency[x]:
            if y not in C and y not in seen:
                seen.add(y)
                stack.append(y)
    return not (seen & B)


class TransitDistanceTable:
    """Straightest-path distances ``D(u, w) = min_π d_F(π, uw)``.

    Entries are symmetric and filled on first use unless :meth:`fill` is
    called up front.
    """

    def __init__(self, g: GeometricGraph, rel_tol: float = 1e-9) -> None:
        self.g = g
        self.rel_tol = rel_tol
        self.entries: dict[tuple[int, int], float] = {}

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, key) -> bool:
        u, w = key
        return (min(u, w), max(u, w)) in self.entries

    def get(self, u: int, w: int) -> float:
        key = (u, w) if u <= w else (w, u)
        val = self.entries.get(key)
        if val is None:
            if u == w:
                val = 0.0
            else:
                pu, pw = self.g.point(key[0]), self.g.point(key[1])
                val = match_fixed_endpoints(self.g, key[0], key[1], Segment(pu, pw), self.rel_tol)
            self.entries[key] = val
        return val

    def fill(self, keys: Iterable[tuple[int, int]]) -> None:
        for u, w in keys:
            self.get(u, w)


class TransitIndex:
    """Vertex-pair query index: SSPD, per-pair transit sets and the distance table.

    Transit sets and distances are computed on demand and memoised; call
    :meth:`fill_all` for full eager preprocessing.
    """

    def __init__(
        self,
        g: GeometricGraph,
        sspd: SspdIndex,
        c_estimate: float,
        rel_tol: float = 1e-9,
    ) -> None:
        self.g = g
        self.sspd = sspd
        self.c_estimate = float(c_estimate)
        self.rel_tol = rel_tol
        self.transit_sets: dict[int, TransitSet] = {}
        self.table = TransitDistanceTable(g, rel_tol)
        self.n_flagged = 0

    def transit_set(self, k: int) -> TransitSet:
        ts = self.transit_sets.get(k)
        if ts is None:
            pair = self.sspd.pair(k)
            cap = int(2 * self.c_estimate) + 1 if math.isfinite(self.c_estimate) else None
            ts = compute_transit_vertices(self.g, pair, pair_id=k, flow_cap=cap)
            if ts.flagged:
                # packedness was underestimated: rerun without the cap
                self.n_flagged += 1
                log.warning("pair %d: flow exceeds 2c+1 = %d; recomputing uncapped", k, cap)
                full = compute_transit_vertices(self.g, pair, pair_id=k)
                ts = TransitSet(k, full.cut_vertices, full.flow, True)
                self.c_estimate = max(self.c_estimate, full.flow / 2.0)
            self.transit_sets[k] = ts
        return ts

    def cut_for(self, u: int, v: int) -> tuple:
        return self.transit_set(self.sspd.pair_id(u, v)).cut_vertices

    def transit_keys(self, k: int) -> list[tuple[int, int]]:
        pair = self.sspd.pair(k)
        C = self.transit_set(k).cut_vertices
        return [(x, w) for x in pair.side_a + pair.side_b for w in C]

    def fill_all(self) -> None:
        """Compute every transit set and table entry."""
        for k in range(self.sspd.n_pairs):
            self.table.fill(self.transit_keys(k))

    def n_transit_pairs(self) -> int:
        return sum(len(self.transit_keys(k)) for k in range(self.sspd.n_pairs))


def precompute_transit_distances(
    g: GeometricGraph, sspd: SspdIndex, transit_sets, rel_tol: float = 1e-9
) -> TransitDistanceTable:
    """Eagerly fill the distance table for every transit pair."""
    table = TransitDistanceTable(g, rel_tol)
    for ts in transit_sets:
        pair = sspd.pair(ts.pair_id)
        table.fill((x, w) for x in pair.side_a + pair.side_b for w in ts.cut_vertices)
    return table


def build_transit_index(
    g: GeometricGraph,
    c_estimate: float,
    *,
    s: float = 0.5,
    rel_tol: float = 1e-9,
    eager: bool = False,
) -> TransitIndex:
    idx = TransitIndex(g, build_sspd(g, s, allow_single=True), c_estimate, rel_tol)
    if eager:
        idx.fill_all()
    return idx


def straightest_path_query(idx: TransitIndex, u: int, v: int) -> float:
    """3-approximate minimum Fréchet distance between ``uv`` and a ``u``-``v`` path.

    Returns ``min_w max(D(u, w), D(w, v)) + d(w, uv)`` over the transit
    vertices ``w`` of the pair covering ``(u, v)``; ``0`` when ``u == v``.
    """
    if u == v:
        return 0.0
    g = idx.g
    return straightest_path_query_segment(idx, u, v, Segment(g.point(u), g.point(v)))


def straightest_path_query_segment(
    idx: TransitIndex, u: int, v: int, ab: Segment, *, return_witness: bool = False
):
    """3-approximation of the best ``u``-``v`` path against an arbitrary segment.

    For each transit vertex ``w`` the polyline ``uw ∘ wv`` is within
    ``max(|ua|, |vb|, d(w, ab))`` of ``ab`` (split at the point ``t`` of
    ``ab`` closest to ``w``); adding ``max(D(u, w), D(w, v))`` bounds a real
    path, so every returned value is witnessed.

    Returns
    -------
    float, or (float, w, t) with ``return_witness``
        ``t`` is the split parameter on ``ab``; ``w`` is ``-1`` for ``u == v``.
    """
    g = idx.g
    pu, pv = g.point(u), g.point(v)
    end = max(dist(pu, ab.a), dist(pv, ab.b))
    if u == v:
        val = max(end, dist(pu, ab.b))
        return (val, -1, 0.0) if return_witness else val
    best, bw, bt = math.inf, -1, 0.0
    for w in idx.cut_for(u, v):
        pw = g.point(w)
        t = closest_param_on_segment(pw, ab.a, ab.b)
        dw = max(end, dist(pw, ab.at(t)))
        if dw >= best:
            continue
        val = max(idx.table.get(u, w), idx.table.get(w, v)) + dw
        if val < best:
            best, bw, bt = val, w, t
    return (best, bw, bt) if return_witness else best
