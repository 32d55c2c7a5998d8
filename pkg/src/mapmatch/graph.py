"""Plane-embedded graphs, the shortest-path metric, packedness estimation and a
seeded road-network generator."""

from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

__all__ = [
    "GeometricGraph",
    "GraphPoint",
    "PackednessReport",
    "DisconnectedGraphError",
    "graph_distance",
    "vertex_distances",
    "estimate_packedness",
    "length_in_ball",
    "generate_network",
    "split_components",
    "proper_crossings",
]

log = logging.getLogger(__name__)


class DisconnectedGraphError(ValueError):
    """Raised when a graph handed to ingestion is not connected."""


class GeometricGraph:
    """Connected undirected graph with straight-segment edges.

    Parameters
    ----------
    vertices : array_like, shape (n, 2)
        Vertex coordinates.
    edges : array_like, shape (m, 2)
        Vertex-index pairs. Duplicate edges are dropped; self-loops are
        rejected.
    require_connected : bool, default True
        Reject disconnected input.
    """

    def __init__(self, vertices, edges, *, require_connected: bool = True) -> None:
        xy = np.asarray(vertices, dtype=float).reshape(-1, 2)
        if len(xy) == 0:
            raise ValueError("graph needs at least one vertex")
        if not np.all(np.isfinite(xy)):
            raise ValueError("vertex coordinates must be finite")
        n = len(xy)
        raw = np.asarray(edges, dtype=np.int64).reshape(-1, 2) if len(edges) else np.zeros((0, 2), np.int64)
        seen: set[tuple[int, int]] = set()
        kept: list[tuple[int, int]] = []
        for i, j in raw.tolist():
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"edge ({i}, {j}) references a missing vertex")
            if i == j:
                raise ValueError(f"self-loop at vertex {i}")
            key = (i, j) if i < j else (j, i)
            if key in seen:
                continue
            seen.add(key)
            kept.append((i, j))
        xy = xy.copy()
        xy.setflags(write=False)
        self.xy = xy
        e = np.asarray(kept, dtype=np.int64).reshape(-1, 2)
        e.setflags(write=False)
        self.edges = e
        d = xy[e[:, 1]] - xy[e[:, 0]] if len(e) else np.zeros((0, 2))
        lengths = np.hypot(d[:, 0], d[:, 1])
        lengths.setflags(write=False)
        self.edge_lengths = lengths
        adj: list[list[tuple[int, int, float]]] = [[] for _ in range(n)]
        for k, (i, j) in enumerate(kept):
            adj[i].append((j, k, float(lengths[k])))
            adj[j].append((i, k, float(lengths[k])))
        self.adjacency = adj
        self._pts = [(float(x), float(y)) for x, y in xy]
        self._edge_of: dict[tuple[int, int], int] = {}
        for k, (i, j) in enumerate(kept):
            self._edge_of[(i, j)] = k
            self._edge_of[(j, i)] = k
        self._csr: Optional[csr_matrix] = None
        if require_connected and not self.is_connected():
            raise DisconnectedGraphError("graph is not connected")

    # basic accessors -----------------------------------------------------
    @property
    def n_vertices(self) -> int:
        return int(self.xy.shape[0])

    @property
    def n_edges(self) -> int:
        return int(self.edges.shape[0])

    @property
    def complexity(self) -> int:
        """``p = |V| + |E|``."""
        return self.n_vertices + self.n_edges

    def point(self, v: int) -> tuple[float, float]:
        return self._pts[v]

    @property
    def points(self) -> list[tuple[float, float]]:
        return self._pts

    def edge_index(self, i: int, j: int) -> Optional[int]:
        return self._edge_of.get((i, j))

    def endpoints_of(self, e: int) -> tuple[int, int]:
        i, j = self.edges[e]
        return (int(i), int(j))

    def neighbors(self, v: int) -> list[tuple[int, int, float]]:
        """``(neighbor, edge index, length)`` triples."""
        return self.adjacency[v]

    def csr(self) -> csr_matrix:
        if self._csr is None:
            n = self.n_vertices
            e = self.edges
            w = self.edge_lengths
            # zero-length edges would vanish from a sparse matrix
            w = np.where(w > 0, w, 1e-300)
            rows = np.concatenate([e[:, 0], e[:, 1]])
            cols = np.concatenate([e[:, 1], e[:, 0]])
            self._csr = csr_matrix((np.concatenate([w, w]), (rows, cols)), shape=(n, n))
        return self._csr

    def is_connected(self) -> bool:
        if self.n_vertices == 1:
            return True
        k, _ = connected_components(self.csr(), directed=False)
        return k == 1

    def bbox(self) -> tuple[float, float, float, float]:
        lo = self.xy.min(axis=0)
        hi = self.xy.max(axis=0)
        return (float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1]))

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, GeometricGraph)
            and np.array_equal(self.xy, other.xy)
            and np.array_equal(self.edges, other.edges)
        )

    def __repr__(self) -> str:
        return f"GeometricGraph(|V|={self.n_vertices}, |E|={self.n_edges})"

    def subdivide(self, max_len: float) -> "GeometricGraph":
        """Copy with every edge split into pieces no longer than ``max_len``."""
        pts = [tuple(p) for p in self._pts]
        new_edges: list[tuple[int, int]] = []
        for k, (i, j) in enumerate(self.edges.tolist()):
            pieces = max(1, int(math.ceil(self.edge_lengths[k] / max_len)))
            prev = i
            a, b = self._pts[i], self._pts[j]
            for s in range(1, pieces):
                t = s / pieces
                pts.append((a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])))
                cur = len(pts) - 1
                new_edges.append((prev, cur))
                prev = cur
            new_edges.append((prev, j))
        return GeometricGraph(pts, new_edges)


@dataclass(frozen=True)
class GraphPoint:
    """A point of the graph: a vertex, or a position ``t`` along an edge.

    Use :meth:`at_vertex` and :meth:`on_edge`; ``on_edge`` canonicalises
    edge endpoints to vertex form so that equal locations compare equal.
    """

    vertex: Optional[int] = None
    edge: Optional[int] = None
    t: float = 0.0

    @staticmethod
    def at_vertex(v: int) -> "GraphPoint":
        return GraphPoint(vertex=int(v))

    @staticmethod
    def on_edge(g: GeometricGraph, e: int, t: float) -> "GraphPoint":
        if not 0 <= e < g.n_edges:
            raise ValueError(f"edge {e} out of range")
        t = float(t)
        if not 0.0 <= t <= 1.0:
            raise ValueError("edge parameter must lie in [0, 1]")
        i, j = g.edges[e]
        if t == 0.0:
            return GraphPoint(vertex=int(i))
        if t == 1.0:
            return GraphPoint(vertex=int(j))
        return GraphPoint(edge=int(e), t=t)

    @property
    def is_vertex(self) -> bool:
        return self.vertex is not None

    def validate(self, g: GeometricGraph) -> None:
        if self.vertex is not None:
            if not 0 <= self.vertex < g.n_vertices:
                raise ValueError(f"vertex {self.vertex} out of range")
        elif self.edge is None or not 0 <= self.edge < g.n_edges or not 0.0 <= self.t <= 1.0:
            raise ValueError(f"invalid graph point {self!r}")

    def position(self, g: GeometricGraph) -> tuple[float, float]:
        if self.vertex is not None:
            return g.point(self.vertex)
        i, j = g.edges[self.edge]
        a, b = g.point(int(i)), g.point(int(j))
        return (a[0] + self.t * (b[0] - a[0]), a[1] + self.t * (b[1] - a[1]))

    def anchors(self, g: GeometricGraph) -> list[tuple[int, float]]:
        """Graph vertices reachable along the carrying edge, with offsets."""
        if self.vertex is not None:
            return [(self.vertex, 0.0)]
        i, j = g.edges[self.edge]
        length = float(g.edge_lengths[self.edge])
        return [(int(i), self.t * length), (int(j), (1.0 - self.t) * length)]

    def endpoints(self, g: GeometricGraph) -> tuple[int, int]:
        """Endpoints ``(c, d)`` of the carrying edge; ``(v, v)`` for a vertex."""
        if self.vertex is not None:
            return (self.vertex, self.vertex)
        i, j = g.edges[self.edge]
        return (int(i), int(j))


def vertex_distances(g: GeometricGraph, sources: dict[int, float]) -> np.ndarray:
    """Shortest-path distances from a weighted multi-source set to all vertices."""
    dist_arr = np.full(g.n_vertices, np.inf)
    heap: list[tuple[float, int]] = []
    for v, d0 in sources.items():
        if d0 < dist_arr[v]:
            dist_arr[v] = d0
            heap.append((d0, v))
    heapq.heapify(heap)
    adj = g.adjacency
    while heap:
        d, v = heapq.heappop(heap)
        if d > dist_arr[v]:
            continue
        for w, _, length in adj[v]:
            nd = d + length
            if nd < dist_arr[w]:
                dist_arr[w] = nd
                heapq.heappush(heap, (nd, w))
    return dist_arr


def graph_distance(g: GeometricGraph, u: GraphPoint, v: GraphPoint) -> float:
    """Shortest-path distance ``d_P(u, v)`` between two graph points.

    Edge-interior points are handled by splitting their edge on the fly.

    Examples
    --------
    >>> g = GeometricGraph([(0, 0), (1, 0), (2, 0)], [(0, 1), (1, 2)])
    >>> graph_distance(g, GraphPoint.at_vertex(0), GraphPoint.at_vertex(2))
    2.0
    """
    u.validate(g)
    v.validate(g)
    if u == v:
        return 0.0
    best = math.inf
    if u.vertex is None and v.vertex is None and u.edge == v.edge:
        best = abs(u.t - v.t) * float(g.edge_lengths[u.edge])
    d = vertex_distances(g, dict(_min_sources(u.anchors(g))))
    for w, off in v.anchors(g):
        best = min(best, float(d[w]) + off)
    return best


def _min_sources(anchors: Iterable[tuple[int, float]]) -> dict[int, float]:
    out: dict[int, float] = {}
    for v, d in anchors:
        if d < out.get(v, math.inf):
            out[v] = d
    return out


class SpatialLocator:
    """Nearest-vertex and nearest-edge-point lookups for a fixed graph."""

    def __init__(self, g: GeometricGraph) -> None:
        self.g = g
        self.vertex_tree = cKDTree(g.xy)
        if g.n_edges:
            a = g.xy[g.edges[:, 0]]
            b = g.xy[g.edges[:, 1]]
            self.edge_tree = cKDTree(0.5 * (a + b))
            self.half_max = 0.5 * float(g.edge_lengths.max())

    def nearest_vertex(self, p) -> tuple[float, int]:
        d, i = self.vertex_tree.query(np.asarray(p, dtype=float))
        return float(d), int(i)

    def nearest_edge_distance(self, p) -> float:
        """Distance from ``p`` to the closest point of the embedded graph."""
        dv, _ = self.nearest_vertex(p)
        if not self.g.n_edges:
            return dv
        p = np.asarray(p, dtype=float)
        cand = self.edge_tree.query_ball_point(p, dv + self.half_max + 1e-12)
        if not cand:
            return dv
        e = self.g.edges[np.asarray(cand)]
        a = self.g.xy[e[:, 0]]
        d = self.g.xy[e[:, 1]] - a
        l2 = np.einsum("ij,ij->i", d, d)
        t = np.clip(np.einsum("ij,ij->i", p - a, d) / np.where(l2 > 0, l2, 1.0), 0.0, 1.0)
        q = a + t[:, None] * d - p
        return min(dv, float(np.min(np.hypot(q[:, 0], q[:, 1]))))


# packedness -------------------------------------------------------------


@dataclass(frozen=True)
class PackednessReport:
    """Largest sampled ratio of edge length inside a ball to its radius."""

    c_estimate: float
    center: tuple[float, float]
    radius: float


def _edge_geometry(g: GeometricGraph):
    a = g.xy[g.edges[:, 0]]
    b = g.xy[g.edges[:, 1]]
    return a, b - a, g.edge_lengths


def length_in_ball(g: GeometricGraph, center, radii) -> np.ndarray:
    """Total edge length inside closed disks around ``center``.

    Parameters
    ----------
    g : GeometricGraph
    center : (x, y)
    radii : array_like of float

    Returns
    -------
    numpy.ndarray
        One total per radius.
    """
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    if g.n_edges == 0:
        return np.zeros_like(radii)
    a, d, lengths = _edge_geometry(g)
    return _length_in_ball(np.asarray(center, float), radii, a, d, lengths)


def _length_in_ball(c, radii, a, d, lengths):
    l2 = lengths * lengths
    pa = c - a
    safe = np.where(l2 > 0, l2, 1.0)
    t0 = np.einsum("ij,ij->i", pa, d) / safe
    cross = pa[:, 0] * d[:, 1] - pa[:, 1] * d[:, 0]
    perp2 = cross * cross / safe
    rem = radii[:, None] ** 2 - perp2[None, :]
    half = np.sqrt(np.maximum(rem, 0.0) / safe[None, :])
    lo = np.clip(t0[None, :] - half, 0.0, 1.0)
    hi = np.clip(t0[None, :] + half, 0.0, 1.0)
    inside = np.where(rem >= 0, np.maximum(hi - lo, 0.0), 0.0) * lengths[None, :]
    return inside.sum(axis=1)


def estimate_packedness(
    g: GeometricGraph, samples: int = 64, seed: int = 0, max_radii: int = 48
) -> PackednessReport:
    """Lower bound on the packedness constant ``c`` by sampling balls.

    Candidate centres are all vertices, all edge midpoints and ``samples``
    seeded uniform points in the bounding box. Candidate radii per centre
    are the distances to every vertex and every edge (the values at which
    the enclosed length changes its form), their doubles, and half the
    shortest incident edge at vertices; the list is thinned to at most
    ``max_radii`` values per centre.

    Returns
    -------
    PackednessReport
        ``c_estimate`` equals the enclosed-length ratio of ``(center, radius)``.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    if g.n_edges == 0:
        return PackednessReport(0.0, g.point(0), 0.0)
    a, d, lengths = _edge_geometry(g)
    centers = [g.xy, a + 0.5 * d]
    x0, y0, x1, y1 = g.bbox()
    centers.append(np.column_stack([rng.uniform(x0, x1, samples), rng.uniform(y0, y1, samples)]))
    allc = np.vstack(centers)
    nv = g.n_vertices
    min_inc = np.full(nv, np.inf)
    np.minimum.at(min_inc, g.edges[:, 0], lengths)
    np.minimum.at(min_inc, g.edges[:, 1], lengths)
    best = (0.0, g.point(0), 0.0)
    for ci, c in enumerate(allc):
        dv = np.hypot(g.xy[:, 0] - c[0], g.xy[:, 1] - c[1])
        pa = c - a
        l2 = np.where(lengths > 0, lengths**2, 1.0)
        t = np.clip(np.einsum("ij,ij->i", pa, d) / l2, 0.0, 1.0)
        de = np.hypot(*(a + t[:, None] * d - c).T)
        radii = np.concatenate([dv, de, 2 * dv])
        radii = np.unique(radii[radii > 0])
        if len(radii) > max_radii:
            idx = np.unique(np.round(np.geomspace(1, len(radii), max_radii)).astype(int) - 1)
            radii = radii[idx]
        if ci < nv and np.isfinite(min_inc[ci]) and min_inc[ci] > 0:
            radii = np.append(radii, 0.5 * min_inc[ci])
        if len(radii) == 0:
            continue
        tot = _length_in_ball(c, radii, a, d, lengths)
        ratio = tot / radii
        k = int(np.argmax(ratio))
        if ratio[k] > best[0]:
            best = (float(ratio[k]), (float(c[0]), float(c[1])), float(radii[k]))
    return PackednessReport(*best)


# generator --------------------------------------------------------------


class _DSU:
    def __init__(self, n: int) -> None:
        self.p = list(range(n))

    def find(self, x: int) -> int:
        while self.p[x] != x:
            self.p[x] = self.p[self.p[x]]
            x = self.p[x]
        return x

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.p[ra] = rb
        return True


def generate_network(
    width: int,
    height: int,
    target_c: float = math.inf,
    jitter: float = 0.2,
    seed: int = 0,
    *,
    drop_fraction: float = 0.3,
    diagonal_fraction: float = 0.1,
    packedness_samples: int = 32,
) -> GeometricGraph:
    """Seeded jittered-grid road network.

    Vertices sit on a unit grid perturbed by up to ``jitter`` per
    coordinate. A random spanning tree of the grid edges is always kept;
    ``drop_fraction`` of the other grid edges is removed, and
    ``diagonal_fraction`` of the grid cells receive one diagonal. While the
    sampled packedness exceeds ``target_c``, non-tree edges are removed
    (diagonals first).

    Raises
    ------
    ValueError
        If ``target_c < 2``, sizes are below 2, ``jitter`` is outside
        ``[0, 0.4)``, or ``target_c`` cannot be met even by the spanning
        tree.

    Examples
    --------
    >>> g = generate_network(2, 2, jitter=0.0, drop_fraction=0.0, diagonal_fraction=0.0)
    >>> (g.n_vertices, g.n_edges)
    (4, 4)
    """
    if width < 2 or height < 2:
        raise ValueError("width and height must be at least 2")
    if not 0.0 <= jitter < 0.4:
        raise ValueError("jitter must lie in [0, 0.4)")
    if target_c < 2:
        raise ValueError("target_c below 2 is infeasible for a connected graph with an edge")
    rng = np.random.default_rng(seed)
    gx, gy = np.meshgrid(np.arange(width, dtype=float), np.arange(height, dtype=float))
    xy = np.column_stack([gx.ravel(), gy.ravel()])
    if jitter > 0:
        xy = xy + rng.uniform(-jitter, jitter, size=xy.shape)

    def vid(i: int, j: int) -> int:
        return j * width + i

    grid_edges = []
    for j in range(height):
        for i in range(width):
            if i + 1 < width:
                grid_edges.append((vid(i, j), vid(i + 1, j)))
            if j + 1 < height:
                grid_edges.append((vid(i, j), vid(i, j + 1)))
    order = rng.permutation(len(grid_edges))
    dsu = _DSU(width * height)
    tree, extra = [], []
    for k in order:
        e = grid_edges[k]
        (tree if dsu.union(*e) else extra).append(e)
    keep_extra = [e for e in extra if rng.random() >= drop_fraction]
    diagonals = []
    for j in range(height - 1):
        for i in range(width - 1):
            if rng.random() < diagonal_fraction:
                if rng.random() < 0.5:
                    diagonals.append((vid(i, j), vid(i + 1, j + 1)))
                else:
                    diagonals.append((vid(i + 1, j), vid(i, j + 1)))
    removable = diagonals + keep_extra
    g = GeometricGraph(xy, tree + removable)
    if math.isfinite(target_c):
        c = estimate_packedness(g, packedness_samples, seed).c_estimate
        while c > target_c:
            if not removable:
                raise ValueError(
                    f"target_c={target_c} unreachable: spanning tree alone has c~{c:.2f}"
                )
            drop = max(1, len(removable) // 10)
            removable = removable[:-drop] if len(diagonals) == 0 else _drop_diagonals_first(removable, diagonals, drop)
            diagonals = [e for e in diagonals if e in set(removable)]
            g = GeometricGraph(xy, tree + removable)
            c = estimate_packedness(g, packedness_samples, seed).c_estimate
    # canonical edge order for determinism across construction paths
    edges = sorted((min(e), max(e)) for e in g.edges.tolist())
    return GeometricGraph(xy, edges)


def _drop_diagonals_first(removable, diagonals, drop):
    dset = set(diagonals)
    diag = [e for e in removable if e in dset]
    rest = [e for e in removable if e not in dset]
    k = min(drop, len(diag))
    diag = diag[: len(diag) - k]
    if k < drop:
        rest = rest[: len(rest) - (drop - k)]
    return diag + rest


def split_components(vertices, edges) -> list[GeometricGraph]:
    """Split raw vertex/edge lists into connected graphs, one per component."""
    g = GeometricGraph(vertices, edges, require_connected=False)
    k, labels = connected_components(g.csr(), directed=False)
    out = []
    for comp in range(k):
        idx = np.flatnonzero(labels == comp)
        remap = {int(v): i for i, v in enumerate(idx)}
        sub_edges = [(remap[i], remap[j]) for i, j in g.edges.tolist() if i in remap]
        out.append(GeometricGraph(g.xy[idx], sub_edges))
    return out


def proper_crossings(g: GeometricGraph) -> list[tuple[int, int]]:
    """Pairs of edges that cross at a point interior to at least one of them.

    Collinear overlaps are reported as well; touching at a shared endpoint
    is not a crossing.
    """
    out = []
    pts = g.points
    E = g.edges.tolist()
    boxes = [
        (min(pts[i][0], pts[j][0]), min(pts[i][1], pts[j][1]), max(pts[i][0], pts[j][0]), max(pts[i][1], pts[j][1]))
        for i, j in E
    ]
    order = sorted(range(len(E)), key=lambda k: boxes[k][0])
    active: list[int] = []
    for k in order:
        bx = boxes[k]
        active = [m for m in active if boxes[m][2] >= bx[0]]
        for m in active:
            bm = boxes[m]
            if bm[1] > bx[3] or bx[1] > bm[3]:
                continue
            if _segments_cross(pts, E[k], E[m]):
                out.append((min(k, m), max(k, m)))
        active.append(k)
    return sorted(out)


def _orient(p, q, r) -> float:
    return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])


def _segments_cross(pts, e1, e2) -> bool:
    shared = set(e1) & set(e2)
    p1, p2 = pts[e1[0]], pts[e1[1]]
    q1, q2 = pts[e2[0]], pts[e2[1]]
    o1, o2 = _orient(p1, p2, q1), _orient(p1, p2, q2)
    o3, o4 = _orient(q1, q2, p1), _orient(q1, q2, p2)
    if shared:
        # only a collinear overlap beyond the shared endpoint counts
        if o1 == 0 and o2 == 0:
            s = shared.pop()
            a = p2 if e1[0] == s else p1
            b = q2 if e2[0] == s else q1
            o = pts[s]
            return (a[0] - o[0]) * (b[0] - o[0]) + (a[1] - o[1]) * (b[1] - o[1]) > 0
        return False
    if ((o1 > 0) != (o2 > 0)) and ((o3 > 0) != (o4 > 0)) and o1 != 0 and o2 != 0 and o3 != 0 and o4 != 0:
        return True

    def on_seg(p, q, r):
        return min(p[0], q[0]) <= r[0] <= max(p[0], q[0]) and min(p[1], q[1]) <= r[1] <= max(p[1], q[1])

    if o1 == 0 and on_seg(p1, p2, q1):
        return True
    if o2 == 0 and on_seg(p1, p2, q2):
        return True
    if o3 == 0 and on_seg(q1, q2, p1):
        return True
    if o4 == 0 and on_seg(q1, q2, p2):
        return True
    return False
