"""Matplotlib figures written to files (Agg backend, no display needed)."""

from __future__ import annotations

import os
from collections import defaultdict
from typing import Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .geom import Polyline  # noqa: E402
from .graph import GeometricGraph  # noqa: E402

__all__ = ["plot_scaling", "plot_ratios", "plot_match", "bench_figures"]


def _save(fig, path) -> str:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)


def _median_by_p(rows, key):
    groups = defaultdict(list)
    for r in rows:
        if r.get(key) is not None:
            groups[r["p"]].append(r[key])
    ps = sorted(groups)
    return ps, [float(np.median(groups[p])) for p in ps]


def plot_scaling(rows, path) -> str:
    """Median indexed and exact query time against graph complexity, log-log."""
    fig, ax = plt.subplots(figsize=(5, 3.6))
    for key, label, marker in (("query_ms", "indexed", "o"), ("exact_ms", "exact", "s")):
        ps, ys = _median_by_p(rows, key)
        if ps:
            ax.plot(ps, ys, marker=marker, label=label)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("graph complexity p")
    ax.set_ylabel("median query time [ms]")
    ax.legend(frameon=False)
    return _save(fig, path)


def plot_ratios(rows, path, eps: Optional[float] = None) -> str:
    """Histogram of answer / exact ratios, with the ``1 + eps`` bound marked."""
    ratios = [r["ratio"] for r in rows if r.get("ratio") is not None]
    fig, ax = plt.subplots(figsize=(5, 3.6))
    if ratios:
        ax.hist(ratios, bins=min(30, max(5, len(ratios) // 2)), color="0.4")
    ax.axvline(1.0, color="k", lw=0.8)
    if eps is not None:
        ax.axvline(1.0 + eps, color="r", ls="--", lw=0.8, label=f"1 + eps = {1 + eps:g}")
        ax.legend(frameon=False)
    ax.set_xlabel("answer / exact")
    ax.set_ylabel("count")
    return _save(fig, path)


def plot_match(g: GeometricGraph, path, Q: Optional[Polyline] = None, matched=None) -> str:
    """Graph edges, trajectory and optional matched point sequence."""
    fig, ax = plt.subplots(figsize=(5, 5))
    for i, j in g.edges.tolist():
        (x0, y0), (x1, y1) = g.point(i), g.point(j)
        ax.plot([x0, x1], [y0, y1], color="0.7", lw=0.8)
    ax.plot(g.xy[:, 0], g.xy[:, 1], ".", color="0.5", ms=3)
    if matched:
        m = np.asarray(matched, dtype=float)
        ax.plot(m[:, 0], m[:, 1], color="tab:blue", lw=2, label="matched")
    if Q is not None:
        ax.plot(Q.vertices[:, 0], Q.vertices[:, 1], "-o", color="tab:red", ms=3, lw=1, label="trajectory")
    if matched or Q is not None:
        ax.legend(frameon=False, loc="best")
    ax.set_aspect("equal")
    return _save(fig, path)


def bench_figures(rows, out_dir, stem: str = "bench") -> list[str]:
    """Scaling and ratio figures for bench rows; returns the written paths."""
    os.makedirs(out_dir, exist_ok=True)
    eps = rows[0]["eps"] if rows else None
    return [
        plot_scaling(rows, os.path.join(out_dir, f"{stem}_scaling.png")),
        plot_ratios(rows, os.path.join(out_dir, f"{stem}_ratios.png"), eps),
    ]
