"""(1+ε)-approximate map matching of a single query segment.

Three ingredients on top of the transit index:

* exponential grid stores per transit pair ``(u, w)``: the endpoints of a
  query segment are snapped to grids around ``u`` and ``w`` whose cell size
  is proportional to the endpoint's distance from the anchor, and the stored
  value for the snapped segment, plus the snapping displacement, bounds the
  true one;
* a fixed-endpoint query that splits the segment at sample points near each
  transit vertex and combines two grid lookups;
* a greedy k-center hierarchy with a 3D range index that produces a small
  set of candidate start and end vertices around each segment endpoint.

Grid cells are evaluated on first use and cached, and the decision calls
only refine a cell as far as the threshold at hand requires.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.sparse.csgraph import dijkstra

from .freespace import match_fixed_endpoints_decide
from .geom import Segment, closest_param_on_segment, dist, segment_point_interval
from .graph import GeometricGraph, SpatialLocator, estimate_packedness
from .rangetree import BoxKdTree
from .transit import TransitIndex, build_transit_index, straightest_path_query_segment

__all__ = [
    "GridStore",
    "ClusterHierarchy",
    "EndpointRangeIndex",
    "CandidateVertexSet",
    "SegmentIndex",
    "build_grid_store",
    "build_cluster_hierarchy",
    "build_segment_index",
    "candidate_vertices",
    "query_fixed_endpoints_eps",
    "fixed_endpoints_within",
    "segment_query",
]

log = logging.getLogger(__name__)


# grid stores ------------------------------------------------------------


class _Cell:
    """Bracket on the stored value of one snapped segment.

    ``lb``: value >= lb; ``neg``: value > neg (a failed decision);
    ``hi``: value <= hi (a feasible decision or a witnessed bound).
    """

    __slots__ = ("lb", "neg", "hi")

    def __init__(self, lb: float, hi: float) -> None:
        self.lb = lb
        self.neg = -1.0
        self.hi = hi


class GridStore:
    """Exponential grids around the ends of transit pair ``(u, w)``.

    Scales are the powers of ``1 + eps`` from ``eps * base / 4`` to
    ``4 * base / eps``, where ``base`` is the straightest-path distance of
    the pair. An endpoint at distance ``δ`` from its anchor is snapped on the
    level whose scale first reaches ``δ``, with cell side ``eps * scale / 2``.
    Queries whose displacements fall outside the scale range use the
    witnessed bound ``base + max δ``.
    """

    def __init__(self, g: GeometricGraph, u: int, w: int, eps: float, base: float, fill_tol: float = 1e-6):
        if not 0 < eps < 1:
            raise ValueError("eps must lie in (0, 1)")
        self.g = g
        self.u, self.w = u, w
        self.pu, self.pw = g.point(u), g.point(w)
        self.eps = eps
        self.base = float(base)
        self.fill_tol = fill_tol
        self.s0 = eps * self.base / 4.0
        self.smax = 4.0 * self.base / eps
        self._log_step = math.log1p(eps)
        self.cells: dict[tuple, _Cell] = {}
        self.n_decisions = 0

    @property
    def scales(self) -> list[float]:
        if self.base <= 0:
            return []
        k = int(math.ceil(math.log(self.smax / self.s0) / self._log_step))
        return [self.s0 * (1 + self.eps) ** i for i in range(k + 1)]

    def _snap(self, c, p):
        dx, dy = p[0] - c[0], p[1] - c[1]
        d = math.hypot(dx, dy)
        k = 0 if d <= self.s0 else int(math.ceil(math.log(d / self.s0) / self._log_step))
        side = 0.5 * self.eps * self.s0 * (1 + self.eps) ** k
        ix, iy = round(dx / side), round(dy / side)
        q = (c[0] + ix * side, c[1] + iy * side)
        return (k, ix, iy), q, dist(p, q)

    def _resolve(self, a, t):
        """``(exact_value, None)`` or ``(fallback, (cell, a*, t*, disp))``."""
        da, dt = dist(a, self.pu), dist(t, self.pw)
        m = max(da, dt)
        if self.u == self.w:
            # closed walks cannot beat the trivial path
            return max(da, dist(t, self.pu)), None
        if self.base <= 0.0:
            return m, None
        fallback = self.base + m
        if m <= self.s0 or m > self.smax:
            return fallback, None
        ka, sa, ea = self._snap(self.pu, a)
        kt, st, et = self._snap(self.pw, t)
        key = ka + kt
        cell = self.cells.get(key)
        if cell is None:
            lb = max(dist(sa, self.pu), dist(st, self.pw))
            cell = _Cell(lb, self.base + lb)
            self.cells[key] = cell
        return fallback, (cell, sa, st, max(ea, et))

    def _decide(self, sa, st, x: float) -> bool:
        self.n_decisions += 1
        return match_fixed_endpoints_decide(self.g, self.u, self.w, Segment(sa, st), x)

    def _test(self, cell: _Cell, sa, st, x: float) -> bool:
        if cell.hi <= x:
            return True
        if x < cell.lb or x <= cell.neg:
            return False
        if self._decide(sa, st, x):
            cell.hi = x
            return True
        cell.neg = x
        return False

    def within(self, a, t, tau: float) -> bool:
        """Decide ``value(a, t) <= tau`` using as little refinement as possible."""
        bound, snapped = self._resolve(a, t)
        if bound <= tau:
            return True
        if snapped is None:
            return False
        cell, sa, st, disp = snapped
        return self._test(cell, sa, st, tau - disp)

    def value(self, a, t, cap: float = math.inf) -> float:
        """Witnessed upper bound on ``min_π d_F(π, at)`` over ``u``-``w`` paths.

        Returns ``inf`` as soon as the value is shown to exceed ``cap``.
        """
        bound, snapped = self._resolve(a, t)
        if snapped is None:
            return bound if bound <= cap else math.inf
        cell, sa, st, disp = snapped
        if cell.neg < cell.lb:
            self._test(cell, sa, st, cell.lb)
        while True:
            lo = max(cell.lb, cell.neg)
            if lo + disp > cap:
                break
            if cell.hi <= lo * (1 + self.fill_tol) or cell.hi - lo <= 1e-15 * cell.hi:
                break
            mid = math.sqrt(lo * cell.hi) if lo > 0 else 0.5 * cell.hi
            self._test(cell, sa, st, mid)
        val = min(bound, cell.hi + disp)
        return val if val <= cap else math.inf


def build_grid_store(g: GeometricGraph, u: int, w: int, eps: float, base: float) -> GridStore:
    """Grid store of transit pair ``(u, w)`` with stored straightest distance ``base``."""
    return GridStore(g, u, w, eps, base)


# clustering and candidate vertices ---------------------------------------


@dataclass(frozen=True)
class ClusterHierarchy:
    """Greedy k-center ordering under the graph metric.

    ``radii[k]`` is the covering radius once ``order[:k + 1]`` are centers.
    """

    order: np.ndarray
    radii: np.ndarray

    def __len__(self) -> int:
        return len(self.order)


def build_cluster_hierarchy(g: GeometricGraph, start: int = 0) -> ClusterHierarchy:
    """Farthest-point ordering of all vertices; ties go to the lowest index.

    Examples
    --------
    >>> g = GeometricGraph([(0, 0), (1, 0), (2, 0)], [(0, 1), (1, 2)])
    >>> h = build_cluster_hierarchy(g)
    >>> h.order.tolist(), h.radii.tolist()
    ([0, 2, 1], [2.0, 1.0, 0.0])
    """
    n = g.n_vertices
    csr = g.csr()
    d = dijkstra(csr, directed=False, indices=start)
    chosen = np.zeros(n, dtype=bool)
    chosen[start] = True
    order = [start]
    radii = []
    while len(order) < n:
        masked = np.where(chosen, -1.0, d)
        nxt = int(np.argmax(masked))
        rk = float(masked[nxt])
        radii.append(max(rk, 0.0))
        order.append(nxt)
        chosen[nxt] = True
        if rk > 0:
            d = np.minimum(d, dijkstra(csr, directed=False, indices=nxt, limit=rk))
        d[nxt] = 0.0
    radii.append(0.0)
    return ClusterHierarchy(np.asarray(order, dtype=np.int64), np.asarray(radii, dtype=float))


class EndpointRangeIndex:
    """Points ``(x, y, r_i)`` of the greedy ordering under box reporting."""

    def __init__(self, g: GeometricGraph, hierarchy: ClusterHierarchy) -> None:
        self.hierarchy = hierarchy
        xy = g.xy[hierarchy.order]
        self.points = np.column_stack([xy, hierarchy.radii])
        self.tree = BoxKdTree(self.points)

    def query(self, center, half: float, threshold: float) -> list[int]:
        """Positions ``i`` in the ordering with the vertex inside the square of
        half-side ``half`` around ``center`` and ``r_i >= threshold``."""
        cx, cy = float(center[0]), float(center[1])
        return self.tree.query((cx - half, cy - half, threshold), (cx + half, cy + half, math.inf))


@dataclass(frozen=True)
class CandidateVertexSet:
    anchors: tuple

    def __len__(self) -> int:
        return len(self.anchors)

    def __iter__(self):
        return iter(self.anchors)


class SegmentIndex:
    """Segment query index: transit index, clustering, range index and grid stores."""

    def __init__(
        self,
        g: GeometricGraph,
        transit: TransitIndex,
        eps: float,
        hierarchy: ClusterHierarchy,
        *,
        fill_tol: float = 1e-6,
    ) -> None:
        if not 0 < eps < 1:
            raise ValueError("eps must lie in (0, 1)")
        self.g = g
        self.transit = transit
        self.eps = float(eps)
        self.hierarchy = hierarchy
        self.range_index = EndpointRangeIndex(g, hierarchy)
        self.locator = SpatialLocator(g)
        self.fill_tol = fill_tol
        self.grids: dict[tuple[int, int, float], GridStore] = {}

    @property
    def c_estimate(self) -> float:
        return self.transit.c_estimate

    def grid(self, u: int, w: int, eps: float) -> GridStore:
        key = (u, w, eps)
        got = self.grids.get(key)
        if got is None:
            got = GridStore(self.g, u, w, eps, self.transit.table.get(u, w), self.fill_tol)
            self.grids[key] = got
        return got

    def grid_value(self, u: int, w: int, a, t, eps: float, cap: float = math.inf) -> float:
        if u <= w:
            return self.grid(u, w, eps).value(a, t, cap)
        return self.grid(w, u, eps).value(t, a, cap)

    def grid_within(self, u: int, w: int, a, t, eps: float, tau: float) -> bool:
        if u <= w:
            return self.grid(u, w, eps).within(a, t, tau)
        return self.grid(w, u, eps).within(t, a, tau)

    def n_grid_cells(self) -> int:
        return sum(len(gs.cells) for gs in self.grids.values())


def build_segment_index(
    g: GeometricGraph,
    eps: float,
    *,
    c_estimate: Optional[float] = None,
    rel_tol: float = 1e-9,
    s: float = 0.5,
    eager: bool = False,
    seed: int = 0,
) -> SegmentIndex:
    """Build the transit index and the clustering used by segment queries.

    Parameters
    ----------
    g : GeometricGraph
    eps : float
        Approximation parameter, fixed for the life of the index.
    c_estimate : float, optional
        Packedness estimate; measured when omitted.
    rel_tol : float
        Tolerance of the stored straightest-path distances.
    eager : bool
        Compute all transit sets and straightest-path distances now instead
        of on first use.
    """
    if c_estimate is None:
        c_estimate = estimate_packedness(g, seed=seed).c_estimate
    transit = build_transit_index(g, c_estimate, s=s, rel_tol=rel_tol, eager=eager)
    return SegmentIndex(g, transit, eps, build_cluster_hierarchy(g))


def candidate_vertices(idx: SegmentIndex, center, r: float, eps: float) -> CandidateVertexSet:
    """Vertices covering the square of side ``2r`` around ``center``.

    Every vertex in that square is within graph distance ``eps * r`` of a
    returned anchor.

    Raises
    ------
    ValueError
        If ``r <= 0``.
    """
    if not r > 0:
        raise ValueError("r must be positive")
    h = idx.hierarchy
    thr = eps * r
    found = idx.range_index.query(center, 2.0 * r, thr)
    # first center whose radius drops below the threshold
    k = int(np.searchsorted(-h.radii, -thr, side="right"))
    if k < len(h):
        x, y = idx.g.point(int(h.order[k]))
        if abs(x - center[0]) <= 2.0 * r and abs(y - center[1]) <= 2.0 * r:
            found.append(k)
    return CandidateVertexSet(tuple(sorted(int(h.order[i]) for i in set(found))))


# fixed-endpoint (1+eps) query ---------------------------------------------


def _split_params(ab: Segment, pw, rho: float, step: float) -> list[float]:
    """Parameters on ``ab`` within ``rho`` of ``pw``, spaced at most ``step``
    apart (in length), ordered from the closest point outward."""
    iv = segment_point_interval(pw, ab.a, ab.b, rho)
    if iv is None:
        return []
    lo, hi = iv
    length = ab.length
    if length == 0.0:
        return [0.0]
    tc = min(max(closest_param_on_segment(pw, ab.a, ab.b), lo), hi)
    h = step / length
    out = [tc]
    k = 1
    while True:
        added = False
        if tc + k * h < hi:
            out.append(tc + k * h)
            added = True
        if tc - k * h > lo:
            out.append(tc - k * h)
            added = True
        if not added:
            break
        k += 1
    for end in (lo, hi):
        if end not in out:
            out.append(end)
    return out


def _query_eps(idx: SegmentIndex, eps: Optional[float]) -> float:
    return idx.eps if eps is None else float(eps)


def fixed_endpoints_within(
    idx: SegmentIndex, u: int, v: int, ab: Segment, tau: float, eps: Optional[float] = None
) -> bool:
    """Approximate decision ``min_π d_F(π, ab) <= tau`` over ``u``-``v`` paths.

    A ``True`` answer is always witnessed by a real path; ``False`` is
    returned only if no path is within ``tau / (1 + O(eps))``.
    """
    g = idx.g
    eps = _query_eps(idx, eps)
    pu, pv = g.point(u), g.point(v)
    if u == v:
        return max(dist(pu, ab.a), dist(pu, ab.b)) <= tau
    if max(dist(pu, ab.a), dist(pv, ab.b)) > tau:
        return False
    r3 = straightest_path_query_segment(idx.transit, u, v, ab)
    if r3 <= tau:
        return True
    if r3 > 3.0 * tau:
        return False
    step = eps * r3 / 3.0
    rho = min(3.0 * r3, tau)
    order = sorted(idx.transit.cut_for(u, v), key=lambda w: dist(g.point(w), ab.at(closest_param_on_segment(g.point(w), ab.a, ab.b))))
    for w in order:
        for t in _split_params(ab, g.point(w), rho, step):
            pt = ab.at(t)
            if idx.grid_within(u, w, ab.a, pt, eps, tau) and idx.grid_within(w, v, pt, ab.b, eps, tau):
                return True
    return False


def query_fixed_endpoints_eps(
    idx: SegmentIndex,
    u: int,
    v: int,
    ab: Segment,
    eps: Optional[float] = None,
    *,
    cap: float = math.inf,
) -> float:
    """(1+eps)-approximate ``min_π d_F(π, ab)`` over ``u``-``v`` paths.

    Starts from the 3-approximation ``r``; for each transit vertex ``w`` whose
    ``3r`` ball meets ``ab`` it tries split points ``t`` on that chord
    spaced ``eps * r / 3`` apart and takes ``max`` of the two grid lookups.
    The result is always witnessed. Values above ``cap`` come back as
    ``inf``.
    """
    g = idx.g
    eps = _query_eps(idx, eps)
    pu, pv = g.point(u), g.point(v)
    if u == v:
        val = max(dist(pu, ab.a), dist(pu, ab.b))
        return val if val <= cap else math.inf
    lb = max(dist(pu, ab.a), dist(pv, ab.b))
    if lb > cap:
        return math.inf
    r3 = straightest_path_query_segment(idx.transit, u, v, ab)
    best = r3
    if r3 > lb and r3 > 0:
        step = eps * r3 / 3.0
        for w in idx.transit.cut_for(u, v):
            pw = g.point(w)
            for t in _split_params(ab, pw, min(3.0 * r3, best, cap), step):
                pt = ab.at(t)
                if max(lb, dist(pt, pw)) >= best:
                    continue
                lim = min(best, cap)
                v1 = idx.grid_value(u, w, ab.a, pt, eps, lim)
                if v1 >= best:
                    continue
                v2 = idx.grid_value(w, v, pt, ab.b, eps, lim)
                best = min(best, max(v1, v2))
    return best if best <= cap else math.inf


# segment queries -------------------------------------------------------------


def _segment_decide(idx: SegmentIndex, ab: Segment, r: float, eps_p: float):
    """Three-way decision at ``r``: ``("a", r)``, ``("b", None)`` or ``("c", value)``."""
    g = idx.g
    rr = (1 + eps_p) ** 2 * r
    a, b = ab.a, ab.b
    if r > 0:
        Ta = [u for u in candidate_vertices(idx, a, r, eps_p) if dist(g.point(u), a) <= rr]
        Tb = [v for v in candidate_vertices(idx, b, r, eps_p) if dist(g.point(v), b) <= rr]
    else:
        Ta = [idx.locator.nearest_vertex(a)[1]]
        Tb = [idx.locator.nearest_vertex(b)[1]]
    pairs = sorted(
        (max(dist(g.point(u), a), dist(g.point(v), b)), u, v) for u in Ta for v in Tb
    )
    pairs = [p for p in pairs if p[0] <= rr]
    for lb, u, v in pairs:
        if lb > r:
            break
        if fixed_endpoints_within(idx, u, v, ab, r, eps_p):
            return "a", r
    best = math.inf
    for lb, u, v in pairs:
        if lb >= best:
            break
        best = min(best, query_fixed_endpoints_eps(idx, u, v, ab, eps_p, cap=min(best, rr)))
    if best <= rr:
        return "c", best
    return "b", None


def segment_query(
    idx: SegmentIndex,
    ab: Segment,
    eps: Optional[float] = None,
    rel_tol: float = 1e-6,
    *,
    trace: Optional[list] = None,
) -> float:
    """(1+eps)-approximate Fréchet distance from ``ab`` to its best graph path.

    Paths start and end at vertices. Bisection runs over a three-way
    decision at ``r`` with ``ε' = eps / 6``: feasible, infeasible, or an
    early stop that returns the witnessed value found in the band
    ``(r, (1+ε')²r]``. Every returned value is witnessed by a real path.

    Parameters
    ----------
    trace : list, optional
        Receives ``(r, case)`` for each decision taken.
    """
    eps = idx.eps if eps is None else float(eps)
    if not rel_tol > 0:
        raise ValueError("rel_tol must be positive")
    eps_p = eps / 6.0
    ab = Segment(tuple(map(float, ab.a)), tuple(map(float, ab.b)))

    def decide(r):
        case, val = _segment_decide(idx, ab, r, eps_p)
        if trace is not None:
            trace.append((r, case))
        return case, val

    lo = max(idx.locator.nearest_vertex(ab.a)[0], idx.locator.nearest_vertex(ab.b)[0])
    case, val = decide(lo)
    if case != "b":
        return val
    r = max(2.0 * lo, 1e-6 * max(ab.length, 1e-6))
    while True:
        case, val = decide(r)
        if case == "c":
            return val
        if case == "a":
            hi = r
            break
        lo, r = r, 2.0 * r
    while hi > (1 + rel_tol) * lo and hi - lo > 1e-15 * hi:
        mid = math.sqrt(lo * hi) if lo > 0 else 0.5 * hi
        case, val = decide(mid)
        if case == "c":
            return val
        if case == "a":
            hi = mid
        else:
            lo = mid
    return hi
