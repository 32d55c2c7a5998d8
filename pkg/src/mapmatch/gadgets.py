"""Hard instances built from orthogonal-vectors inputs.

Four six-vertex base curves encode bits; the graph side strings ``0_A`` and
``1_A`` copies into one path per vector of ``A`` plus two looping bypass
curves, and the trajectory strings ``0_B`` and ``1_B`` copies for the vectors
of ``B``. An orthogonal pair gives a path within ``1 + 7nh`` of the
trajectory; without one, every path is at least ``3`` away.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional, Sequence

from .freespace import match_exact
from .geom import Polyline
from .graph import GeometricGraph

__all__ = [
    "BASE_KINDS",
    "OvInstance",
    "GadgetInstance",
    "GapTooLarge",
    "base_curve",
    "build_gadget",
    "random_ov",
    "verify_gap",
]

# x-coordinates of the two turning points of each base curve
_TURNS = {"1_A": (12, 6), "0_B": (13, 5), "0_A": (14, 4), "1_B": (15, 3)}
BASE_KINDS = tuple(_TURNS)


def _base_points(kind: str, h: float) -> list[tuple[float, float]]:
    if kind not in _TURNS:
        raise ValueError(f"unknown base curve {kind!r}")
    x1, x2 = _TURNS[kind]
    return [(0.0, 0.0), (float(x1), 0.0), (float(x1), h), (float(x2), h), (float(x2), 2 * h), (18.0, 2 * h)]


def base_curve(kind: str, h: float) -> Polyline:
    """One of the four bit curves ``1_A``, ``0_A``, ``0_B``, ``1_B``.

    Examples
    --------
    >>> base_curve("1_A", 0.01).points()[:3]
    [(0.0, 0.0), (12.0, 0.0), (12.0, 0.01)]
    """
    if not h > 0:
        raise ValueError("h must be positive")
    return Polyline(_base_points(kind, h))


@dataclass(frozen=True)
class OvInstance:
    """Orthogonal-vectors input: two lists of 0/1 vectors of dimension ``d``."""

    A: tuple
    B: tuple
    d: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "A", tuple(tuple(int(x) for x in v) for v in self.A))
        object.__setattr__(self, "B", tuple(tuple(int(x) for x in v) for v in self.B))
        if self.d < 1:
            raise ValueError("dimension must be at least 1")
        if not self.A or not self.B:
            raise ValueError("both vector lists must be non-empty")
        for v in self.A + self.B:
            if len(v) != self.d or any(x not in (0, 1) for x in v):
                raise ValueError(f"vector {v} is not a 0/1 vector of length {self.d}")

    def orthogonal_pair(self) -> Optional[tuple[int, int]]:
        """First ``(i, j)`` with ``A[i] . B[j] == 0`` by brute force."""
        for i, a in enumerate(self.A):
            for j, b in enumerate(self.B):
                if not any(x & y for x, y in zip(a, b)):
                    return i, j
        return None

    @property
    def is_yes(self) -> bool:
        return self.orthogonal_pair() is not None


def random_ov(n: int, m: int, d: int, seed: int = 0, force: Optional[bool] = None) -> OvInstance:
    """Random instance; ``force=True``/``False`` resamples until YES/NO.

    A NO instance is always reachable because all-ones vectors are never
    orthogonal; after 1000 failed draws the all-ones instance is returned.
    """
    rng = random.Random(seed)
    for _ in range(1000):
        A = [tuple(rng.randint(0, 1) for _ in range(d)) for _ in range(n)]
        B = [tuple(rng.randint(0, 1) for _ in range(d)) for _ in range(m)]
        ov = OvInstance(tuple(A), tuple(B), d)
        if force is None or ov.is_yes == force:
            return ov
    if force:
        A = [tuple([0] * d)] + A[1:]
        return OvInstance(tuple(A), tuple(B), d)
    return OvInstance(tuple([(1,) * d] * n), tuple([(1,) * d] * m), d)


@dataclass
class GadgetInstance:
    graph: GeometricGraph
    trajectory: Polyline
    h: float
    is_yes: bool
    ov: OvInstance


def _shift(pts, dx: float, dy: float):
    return [(x + dx, y + dy) for x, y in pts]


def _chain(pieces: Sequence[Sequence[tuple]]) -> list[tuple[float, float]]:
    """Concatenate point lists, joining consecutive pieces by a straight edge."""
    out: list[tuple[float, float]] = []
    for piece in pieces:
        for p in piece:
            if not out or out[-1] != p:
                out.append(p)
    return out


def build_gadget(ov: OvInstance, h: Optional[float] = None) -> GadgetInstance:
    """Graph ``P`` and trajectory ``Q`` encoding ``ov``.

    ``h`` defaults to ``0.0001 / |A|``. Vertices with identical coordinates
    are merged.
    """
    n, m, d = len(ov.A), len(ov.B), ov.d
    h = 0.0001 / n if h is None else float(h)
    if not h > 0:
        raise ValueError("h must be positive")
    zero_a = _base_points("0_A", h)
    bit_a = {0: zero_a, 1: _base_points("1_A", h)}
    bit_b = {0: _base_points("0_B", h), 1: _base_points("1_B", h)}

    R = _chain([_shift(zero_a, 18 * k, 0.0) for k in range(1, d + 1)])
    S = _chain([_shift(zero_a, 18 * k, 7 * n * h) for k in range(1, d + 1)])
    T = [
        _chain([_shift(bit_a[ov.A[i - 1][k - 1]], 18 * k, 3 * i * h) for k in range(1, d + 1)])
        for i in range(1, n + 1)
    ]
    u_join = (0.0, 3 * h)
    v_join = (36.0 * d, 6 * n * h)
    U = _chain([[(0.0, -18.0), (0.0, 0.0)], R, [(36.0 * d, 3 * h), u_join, (0.0, 0.0)]])
    V = _chain([[(0.0, 6 * n * h)], S, [v_join, (0.0, 6 * n * h), (0.0, 18.0)]])
    curves = [U, V] + T
    # connectors run from U to the start of each T_i and from its end to V
    curves += [[u_join, Ti[0]] for Ti in T] + [[Ti[-1], v_join] for Ti in T]

    index: dict[tuple[float, float], int] = {}
    edges: set[tuple[int, int]] = set()
    for curve in curves:
        ids = [index.setdefault(p, len(index)) for p in curve]
        for a, b in zip(ids, ids[1:]):
            if a != b:
                edges.add((min(a, b), max(a, b)))
    verts = sorted(index, key=index.get)
    graph = GeometricGraph(verts, sorted(edges))

    X = []
    for j in range(m):
        W = _chain([_shift(bit_b[ov.B[j][k - 1]], 18 * k, 0.0) for k in range(1, d + 1)])
        X.append(_chain([[(0.0, 0.0)], W, [(36.0 * d, 0.0), (0.0, 3 * h)]]))
    Q = Polyline(_chain([[(0.0, -18.0)]] + X + [[(0.0, 18.0)]]))
    return GadgetInstance(graph, Q, h, ov.is_yes, ov)


class GapTooLarge(ValueError):
    """Instance exceeds the size cap of the exact verifier."""


def verify_gap(gi: GadgetInstance, rel_tol: float = 1e-6, *, cap: int = 200_000):
    """Exact matching value and whether it lands on the right side of the gap.

    Returns
    -------
    (value, gap_ok)
        ``gap_ok`` is ``value <= 1.001 (1 + rel_tol)`` for YES instances and
        ``value >= 3 / (1 + rel_tol)`` for NO instances.

    Raises
    ------
    GapTooLarge
        If ``|P| * |Q|`` exceeds ``cap``.
    """
    size = gi.graph.complexity * len(gi.trajectory)
    if size > cap:
        raise GapTooLarge(f"instance size {size} exceeds cap {cap}")
    value = match_exact(gi.graph, gi.trajectory, rel_tol)
    if gi.is_yes:
        ok = value <= 1.001 * (1 + rel_tol)
    else:
        ok = value >= 3.0 / (1 + rel_tol)
    return value, bool(ok)
