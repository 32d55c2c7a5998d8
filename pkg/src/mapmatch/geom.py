"""Planar geometry and continuous Fréchet distance primitives.

Curves are handled as ``(n, 2)`` float arrays wrapped in :class:`Polyline`.
The decision procedure propagates monotone reachability through the
free-space diagram of two polylines; the distance is obtained by bisection
over that decision.
"""

from __future__ import annotations

import math
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np

__all__ = [
    "Point",
    "Segment",
    "Polyline",
    "Interval",
    "FreeSpaceCell",
    "as_point",
    "dist",
    "point_segment_distance",
    "closest_param_on_segment",
    "segment_point_interval",
    "cell_free_space",
    "frechet_decide",
    "frechet_distance",
    "segment_frechet",
]

Point = tuple  # (x, y) with float coordinates
Interval = Optional[tuple]  # (lo, hi) with lo <= hi, or None when empty

# Squared-distance slack, relative to the squared magnitudes involved. It only
# absorbs rounding so that r = 0 on exactly coincident geometry is accepted.
_SQ_SLACK = 1e-24


def as_point(p: Iterable[float]) -> tuple[float, float]:
    """Validate and convert ``p`` to an ``(x, y)`` float tuple.

    Raises
    ------
    ValueError
        If ``p`` does not have two finite coordinates.
    """
    x, y = (float(v) for v in p)
    if not (math.isfinite(x) and math.isfinite(y)):
        raise ValueError(f"non-finite coordinate in point {(x, y)!r}")
    return (x, y)


def dist(p: Sequence[float], q: Sequence[float]) -> float:
    """Euclidean distance between two points."""
    return math.hypot(p[0] - q[0], p[1] - q[1])


class Segment(NamedTuple):
    """Straight segment from ``a`` to ``b``; ``a == b`` is allowed."""

    a: tuple
    b: tuple

    @property
    def length(self) -> float:
        return dist(self.a, self.b)

    def at(self, t: float) -> tuple[float, float]:
        """Point at parameter ``t`` in ``[0, 1]``."""
        return (
            self.a[0] + t * (self.b[0] - self.a[0]),
            self.a[1] + t * (self.b[1] - self.a[1]),
        )

    def reversed(self) -> "Segment":
        return Segment(self.b, self.a)


class Polyline:
    """Polygonal curve with arc-length bookkeeping.

    Parameters
    ----------
    vertices : array_like, shape (n, 2)
        Ordered vertices, ``n >= 1``. Coordinates must be finite.

    Notes
    -----
    The curve is parameterised over ``[0, n - 1]``: ``Q(i + mu)`` is the
    point ``(1 - mu) * v[i] + mu * v[i + 1]``.
    """

    __slots__ = ("vertices", "cumulative_length")

    def __init__(self, vertices) -> None:
        arr = np.asarray(vertices, dtype=float)
        if arr.ndim == 1 and arr.shape[0] == 2:
            arr = arr.reshape(1, 2)
        if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 1:
            raise ValueError("polyline needs an (n, 2) array with n >= 1")
        if not np.all(np.isfinite(arr)):
            raise ValueError("polyline contains non-finite coordinates")
        arr = arr.copy()
        arr.setflags(write=False)
        self.vertices = arr
        steps = np.hypot(*np.diff(arr, axis=0).T) if len(arr) > 1 else np.zeros(0)
        cum = np.concatenate([[0.0], np.cumsum(steps)])
        cum.setflags(write=False)
        self.cumulative_length = cum

    def __len__(self) -> int:
        return int(self.vertices.shape[0])

    def __repr__(self) -> str:
        return f"Polyline(n={len(self)}, length={self.length:.6g})"

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Polyline) and np.array_equal(self.vertices, other.vertices)

    def __hash__(self) -> int:
        return hash(self.vertices.tobytes())

    @property
    def length(self) -> float:
        return float(self.cumulative_length[-1])

    def point(self, i: int) -> tuple[float, float]:
        return (float(self.vertices[i, 0]), float(self.vertices[i, 1]))

    def points(self) -> list[tuple[float, float]]:
        return [(float(x), float(y)) for x, y in self.vertices]

    def segment(self, i: int) -> Segment:
        return Segment(self.point(i), self.point(i + 1))

    def __call__(self, param: float) -> tuple[float, float]:
        n = len(self)
        if n == 1:
            return self.point(0)
        param = min(max(param, 0.0), n - 1.0)
        i = min(int(math.floor(param)), n - 2)
        return self.segment(i).at(param - i)

    def reversed(self) -> "Polyline":
        return Polyline(self.vertices[::-1])

    def resample(self, spacing: float) -> np.ndarray:
        """Points along the curve at arc-length steps of at most ``spacing``.

        All original vertices are kept.
        """
        if len(self) == 1:
            return self.vertices.copy()
        out = [self.vertices[0]]
        for i in range(len(self) - 1):
            a, b = self.vertices[i], self.vertices[i + 1]
            k = max(1, int(math.ceil(np.hypot(*(b - a)) / spacing)))
            ts = np.arange(1, k + 1) / k
            out.extend(a + ts[:, None] * (b - a))
        return np.asarray(out)


def point_segment_distance(p: Sequence[float], s: Segment) -> float:
    """Euclidean distance from ``p`` to the closest point of ``s``.

    Examples
    --------
    >>> point_segment_distance((0, 1), Segment((-1, 0), (1, 0)))
    1.0
    >>> point_segment_distance((3, 4), Segment((0, 0), (0, 0)))
    5.0
    """
    t = closest_param_on_segment(p, s.a, s.b)
    return dist(p, s.at(t))


def closest_param_on_segment(p, a, b) -> float:
    """Parameter in ``[0, 1]`` of the point of segment ``ab`` closest to ``p``."""
    dx, dy = b[0] - a[0], b[1] - a[1]
    l2 = dx * dx + dy * dy
    if l2 == 0.0:
        return 0.0
    t = ((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / l2
    return 0.0 if t < 0.0 else (1.0 if t > 1.0 else t)


def segment_point_interval(p, a, b, r: float) -> Interval:
    """Parameters ``t`` in ``[0, 1]`` with ``|p - (a + t (b - a))| <= r``.

    The set is convex, so it is returned as a closed interval ``(lo, hi)``
    or ``None`` when empty. A degenerate segment yields ``(0, 1)`` or
    ``None``.
    """
    px, py = p[0] - a[0], p[1] - a[1]
    dx, dy = b[0] - a[0], b[1] - a[1]
    l2 = dx * dx + dy * dy
    r2 = r * r
    if l2 == 0.0:
        d2 = px * px + py * py
        return (0.0, 1.0) if d2 <= r2 + _SQ_SLACK * d2 else None
    cross = px * dy - py * dx
    perp2 = cross * cross / l2
    rem = r2 - perp2
    if rem < 0.0:
        if rem < -_SQ_SLACK * (px * px + py * py + l2):
            return None
        rem = 0.0
    t0 = (px * dx + py * dy) / l2
    half = math.sqrt(rem / l2)
    lo = t0 - half
    hi = t0 + half
    if lo < 0.0:
        lo = 0.0
    if hi > 1.0:
        hi = 1.0
    if lo > hi:
        return None
    return (lo, hi)


class FreeSpaceCell(NamedTuple):
    """Free portions of the four boundaries of one free-space cell.

    For segments ``e`` (horizontal axis ``s``) and ``f`` (vertical axis
    ``t``), ``left`` is the set of ``t`` free at ``s = 0``, ``right`` at
    ``s = 1``, ``bottom`` the set of ``s`` free at ``t = 0`` and ``top`` at
    ``t = 1``. Empty portions are ``None``.
    """

    left: Interval
    right: Interval
    bottom: Interval
    top: Interval


def cell_free_space(e: Segment, f: Segment, r: float) -> FreeSpaceCell:
    """Boundary free intervals of the cell of ``e`` against ``f`` at ``r``."""
    if r < 0:
        raise ValueError("r must be non-negative")
    return FreeSpaceCell(
        left=segment_point_interval(e.a, f.a, f.b, r),
        right=segment_point_interval(e.b, f.a, f.b, r),
        bottom=segment_point_interval(f.a, e.a, e.b, r),
        top=segment_point_interval(f.b, e.a, e.b, r),
    )


def _check_pair(A: Polyline, B: Polyline) -> None:
    if not isinstance(A, Polyline) or not isinstance(B, Polyline):
        raise TypeError("expected Polyline arguments")


def _point_curve_max(p, C: Polyline) -> float:
    return float(np.max(np.hypot(C.vertices[:, 0] - p[0], C.vertices[:, 1] - p[1])))


def frechet_decide(A: Polyline, B: Polyline, r: float) -> bool:
    """Decide whether the Fréchet distance of ``A`` and ``B`` is at most ``r``.

    Parameters
    ----------
    A, B : Polyline
        Input curves.
    r : float
        Non-negative threshold. Free space is closed, so equality counts.

    Returns
    -------
    bool

    Raises
    ------
    ValueError
        If ``r`` is negative or not finite.
    """
    _check_pair(A, B)
    r = float(r)
    if not math.isfinite(r) or r < 0:
        raise ValueError("r must be finite and non-negative")
    n, m = len(A) - 1, len(B) - 1
    if n == 0 or m == 0:
        # a point against a curve: every point of the curve must be within r
        if n == 0:
            return _point_curve_max(A.point(0), B) <= r
        return _point_curve_max(B.point(0), A) <= r
    pa, pb = A.points(), B.points()
    if dist(pa[0], pb[0]) > r or dist(pa[n], pb[m]) > r:
        return False

    # left[j]: reachable part of the vertical boundary s = i (current column)
    # for trajectory cell row j; bottom of row 0 handled per column.
    left: list[Interval] = [None] * m
    ok = True
    for j in range(m):
        iv = segment_point_interval(pa[0], pb[j], pb[j + 1], r) if ok else None
        if iv is not None and iv[0] == 0.0:
            left[j] = iv
            ok = iv[1] == 1.0
        else:
            ok = False
    bottom_ok = True
    for i in range(n):
        a0, a1 = pa[i], pa[i + 1]
        # bottom boundary of row 0 in column i
        if bottom_ok:
            bv = segment_point_interval(pb[0], a0, a1, r)
            if bv is not None and bv[0] == 0.0:
                bottom: Interval = bv
                bottom_ok = bv[1] == 1.0
            else:
                bottom = None
                bottom_ok = False
        else:
            bottom = None
        new_left: list[Interval] = [None] * m
        for j in range(m):
            lv = left[j]
            if lv is None and bottom is None:
                continue
            right = segment_point_interval(a1, pb[j], pb[j + 1], r)
            top = segment_point_interval(pb[j + 1], a0, a1, r)
            if right is not None:
                if bottom is None:
                    lo = max(right[0], lv[0])
                    new_left[j] = (lo, right[1]) if lo <= right[1] else None
                else:
                    new_left[j] = right
            if top is not None:
                if lv is None:
                    lo = max(top[0], bottom[0])
                    bottom = (lo, top[1]) if lo <= top[1] else None
                else:
                    bottom = top
            else:
                bottom = None
        left = new_left
    last = left[m - 1]
    return last is not None and last[1] == 1.0


def _curve_lower_bound(A: Polyline, B: Polyline) -> float:
    lb = max(dist(A.point(0), B.point(0)), dist(A.point(len(A) - 1), B.point(len(B) - 1)))
    for X, Y in ((A, B), (B, A)):
        if len(Y) == 1:
            lb = max(lb, _point_curve_max(Y.point(0), X))
            continue
        ya, yb = Y.vertices[:-1], Y.vertices[1:]
        d = yb - ya
        l2 = np.einsum("ij,ij->i", d, d)
        safe = np.where(l2 > 0, l2, 1.0)
        for p in X.vertices:
            t = np.clip(np.einsum("ij,ij->i", p - ya, d) / safe, 0.0, 1.0)
            q = ya + t[:, None] * d
            lb = max(lb, float(np.min(np.hypot(*(q - p).T))))
    return lb


def _curve_upper_bound(A: Polyline, B: Polyline) -> float:
    diff = A.vertices[:, None, :] - B.vertices[None, :, :]
    return float(np.max(np.hypot(diff[..., 0], diff[..., 1])))


def frechet_distance(A: Polyline, B: Polyline, rel_tol: float = 1e-9) -> float:
    """Fréchet distance of two polylines by bisection over :func:`frechet_decide`.

    Parameters
    ----------
    A, B : Polyline
    rel_tol : float, default 1e-9
        Relative accuracy; the result ``r`` satisfies
        ``d_F <= r <= (1 + rel_tol) * d_F``.

    Returns
    -------
    float

    Examples
    --------
    >>> A = Polyline([(0, 0), (10, 0)])
    >>> B = Polyline([(0, 1), (5, 1), (10, 1)])
    >>> round(frechet_distance(A, B), 9)
    1.0
    """
    _check_pair(A, B)
    if not rel_tol > 0:
        raise ValueError("rel_tol must be positive")
    lo = _curve_lower_bound(A, B)
    if frechet_decide(A, B, lo):
        return lo
    hi = max(_curve_upper_bound(A, B), lo)
    return bisect_threshold(lambda r: frechet_decide(A, B, r), lo, hi, rel_tol)


def bisect_threshold(decide, lo: float, hi: float, rel_tol: float, abs_tol: float = 0.0) -> float:
    """Smallest feasible threshold of a monotone predicate, from above.

    ``decide(lo)`` is assumed false and ``decide(hi)`` true. Returns a
    feasible value ``r <= (1 + rel_tol) * r*`` where ``r*`` is the true
    threshold.
    """
    abs_floor = max(abs_tol, 1e-15 * max(abs(hi), 1e-300))
    while hi - lo > rel_tol * lo and hi > abs_floor:
        mid = 0.5 * (lo + hi) if lo <= 0.0 or hi > 4.0 * lo else math.sqrt(lo * hi)
        if mid <= lo or mid >= hi:
            break
        if decide(mid):
            hi = mid
        else:
            lo = mid
    return hi


def segment_frechet(p0, p1, q0, q1) -> float:
    """Fréchet distance between segments ``p0p1`` and ``q0q1`` (exact)."""
    return max(dist(p0, q0), dist(p1, q1))
