"""Seeded benchmark: indexed queries against the exact matcher.

A config is a mapping (usually read from JSON)::

    {"sizes": [[9, 9], [13, 13]], "seeds": [0, 1, 2], "eps": [0.25],
     "q": 10, "queries": 1, "exact_cap": 200000, "timing": true}

One row is written per ``(size, seed, eps, query)``. Graphs come from
:func:`generate_network`, trajectories are noisy random walks of ``q``
vertices. With ``"timing": false`` the three ``*_ms`` columns are left
blank so that repeated runs produce identical files.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import statistics
import time
from dataclasses import astuple, dataclass, fields
from typing import Optional

import numpy as np

from .freespace import match_exact
from .geom import Polyline
from .graph import GeometricGraph, generate_network
from .trajectory import build_map_match_index, map_match_query

__all__ = ["BenchRecord", "DEFAULT_CONFIG", "random_trajectory", "run_bench", "records_to_csv", "write_csv", "read_csv"]

log = logging.getLogger(__name__)

DEFAULT_CONFIG = {
    "sizes": [],
    "seeds": [0],
    "eps": [0.25],
    "q": 10,
    "queries": 1,
    "noise": 0.15,
    "jitter": 0.2,
    "target_c": None,
    "c_estimate": None,
    "rel_tol": 1e-6,
    "exact_cap": 200_000,
    "exact_repeats": 1,
    "repeats": 1,
    "warmup": True,
    "timing": True,
}


@dataclass
class BenchRecord:
    instance_id: str
    p: int
    q: int
    c_estimate: float
    eps: float
    build_ms: Optional[float]
    query_ms: Optional[float]
    exact_ms: Optional[float]
    answer: float
    exact_answer: Optional[float]
    ratio: Optional[float]


def random_trajectory(g: GeometricGraph, q: int, rng: np.random.Generator, noise: float = 0.15) -> Polyline:
    """Random walk over ``q`` vertices (no immediate backtracking) plus Gaussian noise."""
    if q < 1:
        raise ValueError("q must be at least 1")
    v = int(rng.integers(g.n_vertices))
    pts = [g.point(v)]
    prev = -1
    while len(pts) < q:
        nb = [y for y, _, _ in g.adjacency[v] if y != prev] or [prev]
        prev, v = v, int(nb[int(rng.integers(len(nb)))])
        pts.append(g.point(v))
    P = np.asarray(pts) + rng.normal(0.0, noise, (q, 2))
    return Polyline(P)


def _ms(dt: float) -> float:
    return round(dt * 1000.0, 3)


def run_bench(config: Optional[dict] = None) -> list[BenchRecord]:
    cfg = dict(DEFAULT_CONFIG)
    cfg.update(config or {})
    timing = bool(cfg["timing"])
    target_c = math.inf if cfg["target_c"] is None else float(cfg["target_c"])
    records: list[BenchRecord] = []
    for size in cfg["sizes"]:
        w, h = (size, size) if isinstance(size, int) else size
        for seed in cfg["seeds"]:
            g = generate_network(w, h, target_c, cfg["jitter"], seed)
            for eps in cfg["eps"]:
                t0 = time.perf_counter()
                idx = build_map_match_index(g, eps, c_estimate=cfg["c_estimate"], seed=seed)
                build = time.perf_counter() - t0
                rng = np.random.default_rng([seed, w, h])
                for k in range(cfg["queries"]):
                    Q = random_trajectory(g, cfg["q"], rng, cfg["noise"])
                    if cfg["warmup"]:
                        map_match_query(idx, Q, rel_tol=cfg["rel_tol"])
                    times = []
                    for _ in range(max(1, cfg["repeats"])):
                        t0 = time.perf_counter()
                        ans = map_match_query(idx, Q, rel_tol=cfg["rel_tol"])
                        times.append(time.perf_counter() - t0)
                    exact = exact_t = None
                    if g.complexity * len(Q) <= cfg["exact_cap"]:
                        best = math.inf
                        for _ in range(max(1, cfg["exact_repeats"])):
                            t0 = time.perf_counter()
                            exact = match_exact(g, Q, cfg["rel_tol"], endpoints="edge")
                            best = min(best, time.perf_counter() - t0)
                        exact_t = best
                    ratio = ans / exact if exact else None
                    rec = BenchRecord(
                        f"{w}x{h}-s{seed}-e{eps:g}-t{k}",
                        g.complexity,
                        len(Q),
                        idx.c_estimate,
                        float(eps),
                        _ms(build) if timing else None,
                        _ms(statistics.median(times)) if timing else None,
                        _ms(exact_t) if timing and exact_t is not None else None,
                        ans,
                        exact,
                        ratio,
                    )
                    log.info("%s p=%d answer=%.6g exact=%s", rec.instance_id, rec.p, ans, exact)
                    records.append(rec)
    return records


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def records_to_csv(records: list[BenchRecord]) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow([f.name for f in fields(BenchRecord)])
    for rec in records:
        wr.writerow([_cell(v) for v in astuple(rec)])
    return buf.getvalue()


def write_csv(records: list[BenchRecord], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(records_to_csv(records))


def read_csv(path) -> list[dict]:
    """Rows of a bench CSV as dicts with numeric fields converted."""
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            conv = {}
            for key, val in row.items():
                if key == "instance_id":
                    conv[key] = val
                elif val == "":
                    conv[key] = None
                elif key in ("p", "q"):
                    conv[key] = int(val)
                else:
                    conv[key] = float(val)
            out.append(conv)
    return out
