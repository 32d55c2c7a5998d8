"""Fréchet map matching on c-packed road graphs.

Exact matchers, a segment query index, a trajectory query index, hard
instance generators, file formats and a command-line tool.
"""

from .freespace import match_exact, match_exact_decide, match_fixed_endpoints, match_fixed_endpoints_decide
from .gadgets import GadgetInstance, OvInstance, base_curve, build_gadget, random_ov, verify_gap
from .geom import Polyline, Segment, frechet_decide, frechet_distance
from .graph import (
    GeometricGraph,
    GraphPoint,
    estimate_packedness,
    generate_network,
    graph_distance,
)
from .segment_index import SegmentIndex, build_segment_index, segment_query
from .sspd import build_sspd
from .trajectory import MapMatchIndex, build_map_match_index, map_match_query
from .transit import build_transit_index, straightest_path_query

__version__ = "0.1.0"

__all__ = [
    "GadgetInstance",
    "GeometricGraph",
    "GraphPoint",
    "MapMatchIndex",
    "OvInstance",
    "Polyline",
    "Segment",
    "SegmentIndex",
    "base_curve",
    "build_gadget",
    "build_map_match_index",
    "build_segment_index",
    "build_sspd",
    "build_transit_index",
    "estimate_packedness",
    "frechet_decide",
    "frechet_distance",
    "generate_network",
    "graph_distance",
    "map_match_query",
    "match_exact",
    "match_exact_decide",
    "match_fixed_endpoints",
    "match_fixed_endpoints_decide",
    "random_ov",
    "segment_query",
    "straightest_path_query",
    "verify_gap",
]
