"""Graph and trajectory files.

Graphs are JSON ``{"vertices": [[x, y], ...], "edges": [[i, j], ...]}`` or
CSV with ``v,x,y`` and ``e,i,j`` rows (vertices numbered in file order).
Trajectories are JSON ``{"points": [[x, y], ...]}`` or CSV ``x,y`` rows.
Floats are written with ``repr``, the shortest decimal that reads back to
the same double, so files round-trip bit-exactly.
"""

from __future__ import annotations

import csv
import io
import json
import os
from typing import Optional

from .geom import Polyline
from .graph import GeometricGraph, split_components

__all__ = [
    "FORMAT_VERSION",
    "ParseError",
    "read_graph",
    "read_graph_data",
    "write_graph",
    "read_trajectory",
    "write_trajectory",
    "graph_geojson",
    "write_geojson",
]

FORMAT_VERSION = 1


class ParseError(ValueError):
    """Malformed input file; ``line`` is 1-based when known."""

    def __init__(self, path, message: str, line: Optional[int] = None) -> None:
        self.path = str(path)
        self.line = line
        where = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{where}: {message}")


def _fmt(x: float) -> str:
    return repr(float(x))


def _kind(path, fmt: Optional[str]) -> str:
    if fmt:
        return fmt.lower()
    ext = os.path.splitext(str(path))[1].lower()
    if ext in (".json", ".geojson"):
        return "json"
    if ext in (".csv", ".txt"):
        return "csv"
    raise ValueError(f"cannot infer file format from {path!r}; pass fmt")


def _json_load(path):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(path, exc.msg, exc.lineno) from None


def _float(path, tok: str, line: int) -> float:
    try:
        return float(tok)
    except ValueError:
        raise ParseError(path, f"not a number: {tok!r}", line) from None


def _int(path, tok: str, line: int) -> int:
    try:
        return int(tok)
    except ValueError:
        raise ParseError(path, f"not an integer: {tok!r}", line) from None


def _csv_rows(path):
    with open(path, encoding="utf-8", newline="") as fh:
        for line, row in enumerate(csv.reader(fh), start=1):
            row = [c.strip() for c in row]
            if not row or not any(row) or row[0].startswith("#"):
                continue
            yield line, row


def read_graph_data(path, fmt: Optional[str] = None):
    """Raw ``(vertices, edges)`` lists from a graph file."""
    kind = _kind(path, fmt)
    vertices: list[tuple[float, float]] = []
    edges: list[tuple[int, int]] = []
    if kind == "json":
        doc = _json_load(path)
        if not isinstance(doc, dict) or "vertices" not in doc or "edges" not in doc:
            raise ParseError(path, "expected an object with 'vertices' and 'edges'")
        version = doc.get("version", FORMAT_VERSION)
        if version != FORMAT_VERSION:
            raise ParseError(path, f"unsupported graph format version {version}")
        for k, v in enumerate(doc["vertices"]):
            if not (isinstance(v, list) and len(v) == 2 and all(isinstance(c, (int, float)) for c in v)):
                raise ParseError(path, f"vertex {k} is not an [x, y] pair")
            vertices.append((float(v[0]), float(v[1])))
        for k, e in enumerate(doc["edges"]):
            if not (isinstance(e, list) and len(e) == 2 and all(isinstance(c, int) for c in e)):
                raise ParseError(path, f"edge {k} is not an [i, j] index pair")
            edges.append((e[0], e[1]))
    elif kind == "csv":
        for line, row in _csv_rows(path):
            tag = row[0].lower()
            if len(row) != 3 or tag not in ("v", "e"):
                raise ParseError(path, "expected 'v,x,y' or 'e,i,j'", line)
            if tag == "v":
                vertices.append((_float(path, row[1], line), _float(path, row[2], line)))
            else:
                # indices are checked by the graph constructor, so edges may precede vertices
                edges.append((_int(path, row[1], line), _int(path, row[2], line)))
    else:
        raise ValueError(f"unknown graph format {kind!r}")
    return vertices, edges


def read_graph(path, fmt: Optional[str] = None, *, split_components_ok: bool = False):
    """Load a connected graph.

    Returns a :class:`GeometricGraph`, or a list of them (one per connected
    component) when ``split_components_ok`` is set.

    Raises
    ------
    ParseError
        On malformed files.
    DisconnectedGraphError
        If the graph is disconnected and splitting was not requested.
    """
    vertices, edges = read_graph_data(path, fmt)
    try:
        if split_components_ok:
            return split_components(vertices, edges)
        return GeometricGraph(vertices, edges)
    except ValueError as exc:
        if type(exc) is ValueError:
            raise ParseError(path, str(exc)) from None
        raise


def write_graph(g: GeometricGraph, path, fmt: Optional[str] = None) -> None:
    kind = _kind(path, fmt)
    if kind == "json":
        doc = {
            "version": FORMAT_VERSION,
            "vertices": [[float(x), float(y)] for x, y in g.xy.tolist()],
            "edges": [[int(i), int(j)] for i, j in g.edges.tolist()],
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh)
            fh.write("\n")
    elif kind == "csv":
        buf = io.StringIO()
        buf.write(f"# graph v{FORMAT_VERSION}\n")
        for x, y in g.xy.tolist():
            buf.write(f"v,{_fmt(x)},{_fmt(y)}\n")
        for i, j in g.edges.tolist():
            buf.write(f"e,{i},{j}\n")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(buf.getvalue())
    else:
        raise ValueError(f"unknown graph format {kind!r}")


def read_trajectory(path, fmt: Optional[str] = None) -> Polyline:
    """Load a trajectory; empty trajectories are rejected."""
    kind = _kind(path, fmt)
    pts: list[tuple[float, float]] = []
    if kind == "json":
        doc = _json_load(path)
        raw = doc.get("points") if isinstance(doc, dict) else None
        if not isinstance(raw, list):
            raise ParseError(path, "expected an object with a 'points' list")
        for k, p in enumerate(raw):
            if not (isinstance(p, list) and len(p) == 2 and all(isinstance(c, (int, float)) for c in p)):
                raise ParseError(path, f"point {k} is not an [x, y] pair")
            pts.append((float(p[0]), float(p[1])))
    elif kind == "csv":
        for line, row in _csv_rows(path):
            if len(row) != 2:
                raise ParseError(path, "expected 'x,y'", line)
            if not pts and row[0].lower() == "x":
                continue
            pts.append((_float(path, row[0], line), _float(path, row[1], line)))
    else:
        raise ValueError(f"unknown trajectory format {kind!r}")
    if not pts:
        raise ParseError(path, "trajectory is empty")
    return Polyline(pts)


def write_trajectory(Q: Polyline, path, fmt: Optional[str] = None) -> None:
    kind = _kind(path, fmt)
    pts = [[float(x), float(y)] for x, y in Q.points()]
    with open(path, "w", encoding="utf-8") as fh:
        if kind == "json":
            json.dump({"points": pts}, fh)
            fh.write("\n")
        elif kind == "csv":
            fh.write("x,y\n")
            for x, y in pts:
                fh.write(f"{_fmt(x)},{_fmt(y)}\n")
        else:
            raise ValueError(f"unknown trajectory format {kind!r}")


def graph_geojson(g: GeometricGraph, path_points=None, trajectory: Optional[Polyline] = None) -> dict:
    """FeatureCollection of the edges plus an optional matched path and trajectory."""
    feats = [
        {
            "type": "Feature",
            "properties": {"kind": "edge", "edge": k},
            "geometry": {"type": "LineString", "coordinates": [list(g.point(i)), list(g.point(j))]},
        }
        for k, (i, j) in enumerate(g.edges.tolist())
    ]
    for kind, pts in (("path", path_points), ("trajectory", trajectory.points() if trajectory else None)):
        if pts:
            feats.append(
                {
                    "type": "Feature",
                    "properties": {"kind": kind},
                    "geometry": {"type": "LineString", "coordinates": [list(map(float, p)) for p in pts]},
                }
            )
    return {"type": "FeatureCollection", "features": feats}


def write_geojson(path, g: GeometricGraph, path_points=None, trajectory: Optional[Polyline] = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(graph_geojson(g, path_points, trajectory), fh)
        fh.write("\n")
