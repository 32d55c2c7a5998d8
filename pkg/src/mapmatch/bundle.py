"""Single-file persistence of a query index.

Layout: an 8-byte magic, a little-endian ``uint64`` header length, a UTF-8
JSON header (build parameters, counts and a section table) and the raw
little-endian array sections it points at. Loading restores every cached
entry, so a reloaded index answers queries bit-identically to the saved one.
"""

from __future__ import annotations

import json
import struct
from typing import Optional

import numpy as np

from .graph import GeometricGraph
from .segment_index import ClusterHierarchy, GridStore, SegmentIndex, _Cell
from .sspd import SspdIndex
from .trajectory import MapMatchIndex, build_trough_index
from .transit import TransitIndex, TransitSet

__all__ = ["BUNDLE_VERSION", "BundleError", "save_bundle", "load_bundle", "read_header"]

MAGIC = b"MMBNDL\x00\x01"
BUNDLE_VERSION = 1


class BundleError(ValueError):
    """Unreadable or incompatible bundle file."""


def _sections(idx: MapMatchIndex) -> dict[str, np.ndarray]:
    seg = idx.seg
    tr = seg.transit
    sp = tr.sspd
    out: dict[str, np.ndarray] = {
        "graph.xy": np.asarray(idx.g.xy, dtype="<f8"),
        "graph.edges": np.asarray(idx.g.edges, dtype="<i8"),
        "hierarchy.order": np.asarray(seg.hierarchy.order, dtype="<i8"),
        "hierarchy.radii": np.asarray(seg.hierarchy.radii, dtype="<f8"),
        "sspd.boxes": np.asarray(sp.boxes, dtype="<f8"),
        "sspd.node_pairs": np.asarray(sp.node_pairs, dtype="<i8").reshape(-1, 2),
        "troughs.bounds": np.asarray([t.bounds() for t in idx.troughs.troughs], dtype="<f8").reshape(-1, 6),
    }
    for name in ("order", "start", "stop", "left", "right", "parent", "leaf_of"):
        out[f"sspd.{name}"] = np.asarray(getattr(sp, name), dtype="<i8")

    sets = [tr.transit_sets[k] for k in sorted(tr.transit_sets)]
    out["transit.meta"] = np.asarray(
        [(ts.pair_id, ts.flow, int(ts.flagged), len(ts.cut_vertices)) for ts in sets], dtype="<i8"
    ).reshape(-1, 4)
    out["transit.cut"] = np.asarray([w for ts in sets for w in ts.cut_vertices], dtype="<i8")
    keys = sorted(tr.table.entries)
    out["table.keys"] = np.asarray(keys, dtype="<i8").reshape(-1, 2)
    out["table.values"] = np.asarray([tr.table.entries[k] for k in keys], dtype="<f8")

    gkeys = sorted(seg.grids)
    grids = [seg.grids[k] for k in gkeys]
    out["grids.ids"] = np.asarray([(gs.u, gs.w, gs.n_decisions, len(gs.cells)) for gs in grids], dtype="<i8").reshape(-1, 4)
    out["grids.params"] = np.asarray([(gs.eps, gs.base, gs.fill_tol) for gs in grids], dtype="<f8").reshape(-1, 3)
    ckeys, cvals = [], []
    for gs in grids:
        for key, cell in gs.cells.items():
            ckeys.append(key)
            cvals.append((cell.lb, cell.neg, cell.hi))
    out["cells.keys"] = np.asarray(ckeys, dtype="<i8").reshape(-1, 6)
    out["cells.values"] = np.asarray(cvals, dtype="<f8").reshape(-1, 3)
    return out


def save_bundle(idx: MapMatchIndex, path, *, seed: int = 0, extra: Optional[dict] = None) -> dict:
    """Write ``idx`` to ``path``; returns the header written."""
    seg = idx.seg
    tr = seg.transit
    secs = _sections(idx)
    table, offset = [], 0
    for name, arr in secs.items():
        raw = np.ascontiguousarray(arr)
        table.append({"name": name, "dtype": raw.dtype.str, "shape": list(raw.shape), "offset": offset, "nbytes": raw.nbytes})
        offset += raw.nbytes
    header = {
        "version": BUNDLE_VERSION,
        "eps": seg.eps,
        "rel_tol": tr.rel_tol,
        "fill_tol": seg.fill_tol,
        "seed": int(seed),
        "sspd_s": tr.sspd.s,
        "c_estimate": tr.c_estimate,
        "n_flagged": tr.n_flagged,
        "counts": {
            "vertices": idx.g.n_vertices,
            "edges": idx.g.n_edges,
            "sspd_pairs": tr.sspd.n_pairs,
            "transit_sets": len(tr.transit_sets),
            "table_entries": len(tr.table),
            "grid_stores": len(seg.grids),
            "grid_cells": seg.n_grid_cells(),
        },
        "extra": extra or {},
        "sections": table,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for name, arr in secs.items():
            fh.write(np.ascontiguousarray(arr).tobytes())
    return header


def _read(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 16 or data[:8] != MAGIC:
        raise BundleError(f"{path}: not an index bundle")
    (hlen,) = struct.unpack("<Q", data[8:16])
    try:
        header = json.loads(data[16 : 16 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise BundleError(f"{path}: corrupt header ({exc})") from None
    if header.get("version") != BUNDLE_VERSION:
        raise BundleError(f"{path}: bundle version {header.get('version')} != {BUNDLE_VERSION}")
    return header, memoryview(data)[16 + hlen :]


def read_header(path) -> dict:
    return _read(path)[0]


def load_bundle(path) -> tuple[MapMatchIndex, dict]:
    """Restore an index saved by :func:`save_bundle`; returns ``(index, header)``."""
    header, body = _read(path)
    secs: dict[str, np.ndarray] = {}
    for s in header["sections"]:
        end = s["offset"] + s["nbytes"]
        if end > len(body):
            raise BundleError(f"{path}: section {s['name']} truncated")
        arr = np.frombuffer(body[s["offset"] : end], dtype=np.dtype(s["dtype"]))
        secs[s["name"]] = arr.reshape(s["shape"]).copy()

    g = GeometricGraph(secs["graph.xy"], secs["graph.edges"])
    if not np.array_equal(g.edges, secs["graph.edges"]):
        raise BundleError(f"{path}: edge list does not round-trip")
    sp = SspdIndex(
        header["sspd_s"],
        *(secs[f"sspd.{n}"] for n in ("order", "start", "stop", "left", "right", "parent", "leaf_of")),
        secs["sspd.boxes"],
        [tuple(p) for p in secs["sspd.node_pairs"].tolist()],
    )
    tr = TransitIndex(g, sp, header["c_estimate"], header["rel_tol"])
    tr.n_flagged = int(header["n_flagged"])
    cut = secs["transit.cut"].tolist()
    pos = 0
    for pid, flow, flagged, n in secs["transit.meta"].tolist():
        tr.transit_sets[pid] = TransitSet(pid, tuple(cut[pos : pos + n]), flow, bool(flagged))
        pos += n
    for (u, w), val in zip(secs["table.keys"].tolist(), secs["table.values"].tolist()):
        tr.table.entries[(u, w)] = val

    hier = ClusterHierarchy(secs["hierarchy.order"], secs["hierarchy.radii"])
    seg = SegmentIndex(g, tr, header["eps"], hier, fill_tol=header["fill_tol"])
    ckeys = secs["cells.keys"].tolist()
    cvals = secs["cells.values"].tolist()
    pos = 0
    for (u, w, ndec, ncell), (eps, base, fill_tol) in zip(secs["grids.ids"].tolist(), secs["grids.params"].tolist()):
        gs = GridStore(g, u, w, eps, base, fill_tol)
        gs.n_decisions = ndec
        for key, (lb, neg, hi) in zip(ckeys[pos : pos + ncell], cvals[pos : pos + ncell]):
            cell = _Cell(lb, hi)
            cell.neg = neg
            gs.cells[tuple(key)] = cell
        pos += ncell
        seg.grids[(u, w, eps)] = gs

    troughs = build_trough_index(g, header["eps"])
    bounds = np.asarray([t.bounds() for t in troughs.troughs], dtype="<f8").reshape(-1, 6)
    if not np.array_equal(bounds, secs["troughs.bounds"]):
        raise BundleError(f"{path}: trough index does not match the stored graph")
    return MapMatchIndex(seg, troughs), header
