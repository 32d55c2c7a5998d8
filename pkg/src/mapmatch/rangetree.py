"""Static k-d tree answering axis-aligned box reporting queries exactly."""

from __future__ import annotations

import numpy as np

__all__ = ["BoxKdTree"]


class BoxKdTree:
    """k-d tree over ``points`` (shape ``(n, k)``) with closed-box reporting.

    Parameters
    ----------
    points : array_like, shape (n, k)
    leaf_size : int, default 8

    Examples
    --------
    >>> t = BoxKdTree([(0, 0, 1), (1, 1, 0), (2, 2, 2)])
    >>> t.query((0, 0, 1), (2, 2, float("inf")))
    [0, 2]
    """

    def __init__(self, points, leaf_size: int = 8) -> None:
        P = np.asarray(points, dtype=float)
        if P.ndim != 2:
            raise ValueError("points must be a 2-D array")
        self.points = P
        self.leaf_size = max(1, int(leaf_size))
        n, k = P.shape
        self.perm = np.arange(n)
        # node arrays: [start, stop), child ids, bounding box
        self._start: list[int] = []
        self._stop: list[int] = []
        self._kids: list[tuple[int, int]] = []
        self._lo: list[np.ndarray] = []
        self._hi: list[np.ndarray] = []
        if n:
            self._build(0, n, 0)
        self._rows = P.tolist()

    def _build(self, lo: int, hi: int, depth: int) -> int:
        node = len(self._start)
        idx = self.perm[lo:hi]
        pts = self.points[idx]
        self._start.append(lo)
        self._stop.append(hi)
        self._kids.append((-1, -1))
        self._lo.append(pts.min(axis=0))
        self._hi.append(pts.max(axis=0))
        if hi - lo > self.leaf_size:
            axis = int(np.argmax(self._hi[node] - self._lo[node]))
            sel = np.argsort(pts[:, axis], kind="stable")
            self.perm[lo:hi] = idx[sel]
            mid = lo + (hi - lo) // 2
            a = self._build(lo, mid, depth + 1)
            b = self._build(mid, hi, depth + 1)
            self._kids[node] = (a, b)
        return node

    def __len__(self) -> int:
        return self.points.shape[0]

    def query(self, lo, hi) -> list[int]:
        """Indices of points ``p`` with ``lo <= p <= hi`` componentwise, sorted."""
        if not len(self):
            return []
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        lo_l, hi_l = lo.tolist(), hi.tolist()
        k = len(lo_l)
        out: list[int] = []
        stack = [0]
        rows = self._rows
        perm = self.perm
        while stack:
            node = stack.pop()
            nlo, nhi = self._lo[node], self._hi[node]
            if np.any(nhi < lo) or np.any(nlo > hi):
                continue
            s, e = self._start[node], self._stop[node]
            if np.all(nlo >= lo) and np.all(nhi <= hi):
                out.extend(perm[s:e].tolist())
                continue
            a, b = self._kids[node]
            if a < 0:
                for i in perm[s:e].tolist():
                    row = rows[i]
                    if all(lo_l[d] <= row[d] <= hi_l[d] for d in range(k)):
                        out.append(i)
            else:
                stack.append(b)
                stack.append(a)
        out.sort()
        return out
