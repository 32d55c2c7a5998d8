"""Semi-separated pair decomposition of the graph vertices.

A fair-split tree is built over the vertex coordinates and node pairs are
matched top-down: a pair ``(A, B)`` is emitted once
``min(diam A, diam B) <= s * d(A, B)`` holds for conservative bounding-box
estimates (diameter from above, set distance from below), otherwise the side
with the larger diameter is split. Every unordered vertex pair ends up in
exactly one emitted pair.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .graph import GeometricGraph

__all__ = ["SspdPair", "SspdIndex", "build_sspd", "lookup_pair", "verify_sspd"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SspdPair:
    """One semi-separated pair; ``side_a`` and ``side_b`` are sorted tuples."""

    side_a: tuple
    side_b: tuple
    separation_ok: bool = True

    def oriented(self, u: int) -> "SspdPair":
        """Copy with ``u`` on ``side_a``."""
        if u in self.side_a:
            return self
        return SspdPair(self.side_b, self.side_a, self.separation_ok)


class SspdIndex:
    """Split tree, emitted pairs and the node-pair lookup table."""

    def __init__(self, s: float, order, start, stop, left, right, parent, leaf_of, boxes, node_pairs):
        self.s = s
        self.order = np.asarray(order, dtype=np.int64)
        self.start = np.asarray(start, dtype=np.int64)
        self.stop = np.asarray(stop, dtype=np.int64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.parent = np.asarray(parent, dtype=np.int64)
        self.leaf_of = np.asarray(leaf_of, dtype=np.int64)
        self.boxes = np.asarray(boxes, dtype=float).reshape(-1, 4)
        self.node_pairs = [(int(a), int(b)) for a, b in node_pairs]
        self.pair_of: dict[tuple[int, int], int] = {}
        for k, (a, b) in enumerate(self.node_pairs):
            self.pair_of[(a, b)] = k
            self.pair_of[(b, a)] = k
        self._pairs: dict[int, SspdPair] = {}

    @property
    def n_pairs(self) -> int:
        return len(self.node_pairs)

    def members(self, node: int) -> tuple:
        return tuple(sorted(self.order[self.start[node] : self.stop[node]].tolist()))

    def pair(self, k: int) -> SspdPair:
        got = self._pairs.get(k)
        if got is None:
            a, b = self.node_pairs[k]
            got = SspdPair(self.members(a), self.members(b))
            self._pairs[k] = got
        return got

    @property
    def pairs(self) -> list[SspdPair]:
        return [self.pair(k) for k in range(self.n_pairs)]

    def weight(self) -> int:
        """Total size ``sum |A_i| + |B_i|``."""
        sizes = self.stop - self.start
        return int(sum(sizes[a] + sizes[b] for a, b in self.node_pairs))

    def ancestors(self, node: int) -> list[int]:
        out = [node]
        while self.parent[out[-1]] >= 0:
            out.append(int(self.parent[out[-1]]))
        return out

    def pair_id(self, u: int, v: int) -> int:
        """Index of the pair covering ``{u, v}``."""
        if u == v:
            raise ValueError("lookup needs two distinct vertices")
        up = self.ancestors(int(self.leaf_of[u]))
        vp = self.ancestors(int(self.leaf_of[v]))
        for x in up:
            for y in vp:
                k = self.pair_of.get((x, y))
                if k is not None:
                    return k
        raise KeyError(f"no pair covers ({u}, {v})")


def _box(pts: np.ndarray) -> tuple[float, float, float, float]:
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    return (float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1]))


def _diam_ub(b) -> float:
    return math.hypot(b[2] - b[0], b[3] - b[1])


def _dist_lb(b1, b2) -> float:
    dx = max(0.0, b1[0] - b2[2], b2[0] - b1[2])
    dy = max(0.0, b1[1] - b2[3], b2[1] - b1[3])
    return math.hypot(dx, dy)


def build_sspd(g: GeometricGraph, s: float = 0.5, *, allow_single: bool = False) -> SspdIndex:
    """Build an SSPD of the vertices of ``g`` with separation constant ``s``.

    Parameters
    ----------
    g : GeometricGraph
    s : float, default 0.5

    Returns
    -------
    SspdIndex

    Raises
    ------
    ValueError
        If ``s <= 0`` or the graph has fewer than two vertices (unless
        ``allow_single`` is set, in which case a lone vertex yields no pairs).
    """
    if not s > 0:
        raise ValueError("separation constant must be positive")
    n = g.n_vertices
    if n < 2 and not allow_single:
        raise ValueError("SSPD needs at least two vertices")
    xy = g.xy
    order = np.arange(n)
    start, stop, left, right, parent, boxes = [], [], [], [], [], []
    leaf_of = np.full(n, -1)

    def new_node(lo: int, hi: int, par: int) -> int:
        start.append(lo)
        stop.append(hi)
        left.append(-1)
        right.append(-1)
        parent.append(par)
        boxes.append(_box(xy[order[lo:hi]]))
        return len(start) - 1

    root = new_node(0, n, -1)
    stack = [root]
    while stack:
        node = stack.pop()
        lo, hi = start[node], stop[node]
        if hi - lo == 1:
            leaf_of[order[lo]] = node
            continue
        b = boxes[node]
        idx = order[lo:hi]
        w, h = b[2] - b[0], b[3] - b[1]
        if w == 0 and h == 0:
            # coincident points: split the list
            mid = lo + (hi - lo) // 2
        else:
            axis = 0 if w >= h else 1
            cut = 0.5 * (b[axis] + b[axis + 2])
            keys = xy[idx, axis]
            sel = np.argsort(keys, kind="stable")
            idx = idx[sel]
            order[lo:hi] = idx
            k = int(np.searchsorted(keys[sel], cut, side="right"))
            if k == 0 or k == hi - lo:
                k = (hi - lo) // 2
            mid = lo + k
        a = new_node(lo, mid, node)
        c = new_node(mid, hi, node)
        left[node], right[node] = a, c
        stack.extend([a, c])

    node_pairs: list[tuple[int, int]] = []
    work = [(left[v], right[v]) for v in range(len(start)) if left[v] >= 0]
    while work:
        a, b = work.pop()
        ba, bb = boxes[a], boxes[b]
        da, db = _diam_ub(ba), _diam_ub(bb)
        if min(da, db) <= s * _dist_lb(ba, bb) or (stop[a] - start[a] == 1 and stop[b] - start[b] == 1):
            node_pairs.append((a, b))
            continue
        if (da >= db and left[a] >= 0) or left[b] < 0:
            work.append((left[a], b))
            work.append((right[a], b))
        else:
            work.append((a, left[b]))
            work.append((a, right[b]))
    node_pairs.sort()
    idx = SspdIndex(s, order, start, stop, left, right, parent, leaf_of, boxes, node_pairs)
    log.debug("sspd: %d vertices, %d pairs, weight %d", n, idx.n_pairs, idx.weight())
    return idx


def lookup_pair(idx: SspdIndex, u: int, v: int) -> SspdPair:
    """The unique pair covering ``u`` and ``v``, oriented with ``u`` in ``side_a``.

    Raises
    ------
    ValueError
        If ``u == v``.
    """
    return idx.pair(idx.pair_id(u, v)).oriented(u)


def verify_sspd(idx: SspdIndex, g: GeometricGraph) -> dict:
    """Exhaustive check of coverage and exact separation (desk scale only)."""
    n = g.n_vertices
    cover = np.zeros((n, n), dtype=np.int64)
    bad_sep = 0
    xy = g.xy
    for p in idx.pairs:
        A = np.asarray(p.side_a)
        B = np.asarray(p.side_b)
        cover[np.ix_(A, B)] += 1
        cover[np.ix_(B, A)] += 1
        da = _exact_diam(xy[A])
        db = _exact_diam(xy[B])
        dab = float(np.min(np.hypot(*(xy[A][:, None, :] - xy[B][None, :, :]).transpose(2, 0, 1))))
        if min(da, db) > idx.s * dab + 1e-12 * max(1.0, dab):
            bad_sep += 1
    off = ~np.eye(n, dtype=bool)
    return {
        "uncovered": int(np.sum((cover == 0) & off) // 2),
        "multiply_covered": int(np.sum((cover > 1) & off) // 2),
        "bad_separation": bad_sep,
    }


def _exact_diam(P: np.ndarray) -> float:
    if len(P) < 2:
        return 0.0
    d = P[:, None, :] - P[None, :, :]
    return float(np.max(np.hypot(d[..., 0], d[..., 1])))
