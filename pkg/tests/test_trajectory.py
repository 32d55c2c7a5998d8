import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.sparse.csgraph import dijkstra

from mapmatch.freespace import match_exact
from mapmatch.geom import Polyline, Segment, segment_frechet
from mapmatch.graph import GeometricGraph, GraphPoint, estimate_packedness, generate_network, graph_distance
from mapmatch.segment_index import segment_query
from mapmatch.trajectory import (
    Trough,
    _clip_end,
    _clip_start,
    build_capacity_dag,
    build_map_match_index,
    build_trough_index,
    candidate_points,
    edge_arc_capacity,
    map_match_query,
)

EPS = 0.25


@pytest.fixture(scope="module")
def idx():
    return build_map_match_index(generate_network(5, 5, seed=1), EPS)


def test_trough_membership_examples():
    t = Trough(0, (0.0, 0.0), (1.0, 0.0), EPS)
    assert t.contains(0.5, 0.0, 1 / (4 * EPS))
    assert t.contains(0.5, 0.0, t.z_max)
    assert not t.contains(0.5, 0.0, t.z_max * 1.001)
    assert not t.contains(0.5, 3.0, 0.5)
    g = GeometricGraph([(0, 0), (1, 0)], [(0, 1)])
    tix = build_trough_index(g, EPS)
    assert tix.stab(0.5, 0.0, 1 / (4 * EPS)) == [0]
    assert tix.stab(0.5, 0.0, 2 / EPS * 1.01) == []


def test_trough_index_rejects_bad_eps():
    with pytest.raises(ValueError):
        build_trough_index(GeometricGraph([(0, 0), (1, 0)], [(0, 1)]), 1.5)


_TIX = build_trough_index(generate_network(9, 9, seed=3), EPS)


@settings(max_examples=200, deadline=None)
@given(st.floats(-2, 11), st.floats(-2, 11), st.floats(0, 12))
def test_stab_equals_linear_scan(x, y, z):
    assert _TIX.stab(x, y, z) == _TIX.stab_linear(x, y, z)


def test_candidates_on_long_edge():
    g = GeometricGraph([(0, 0), (20, 0)], [(0, 1)])
    mi = build_map_match_index(g, EPS, c_estimate=2.0)
    a, r = (7.3, 0.05), 0.4
    T = candidate_points(mi, a, r, EPS)
    assert "edge" in T.kinds
    assert min(math.dist(p.position(g), (7.3, 0.0)) for p in T.points) <= EPS * r / 2 + 1e-12


def test_candidates_short_edges_only():
    g = generate_network(4, 4, seed=2)
    mi = build_map_match_index(g, EPS)
    r = 2.0 * float(g.edge_lengths.max()) / EPS  # every edge is short relative to r
    T = candidate_points(mi, (1.5, 1.5), r * 1.01, EPS)
    assert set(T.kinds) == {"vertex"}


def test_candidate_coverage_dense_sampling(idx):
    g = idx.g
    D = dijkstra(g.csr(), directed=False)
    rng = np.random.default_rng(0)
    for _ in range(10):
        a = rng.uniform(0, 4, 2)
        r = float(rng.uniform(0.2, 1.5))
        T = candidate_points(idx, a, r, EPS)
        for e, (i, j) in enumerate(g.edges.tolist()):
            for t in np.linspace(0, 1, 41):
                f = GraphPoint.on_edge(g, e, float(t))
                if np.all(np.abs(np.asarray(f.position(g)) - a) <= r):
                    assert min(graph_distance(g, f, b) for b in T.points) <= EPS * r + 1e-9


@settings(max_examples=80, deadline=None)
@given(st.tuples(st.floats(-2, 2), st.floats(-2, 2)), st.tuples(st.floats(-2, 2), st.floats(-2, 2)), st.tuples(st.floats(-2, 2), st.floats(-2, 2)), st.floats(0.05, 2))
def test_clipping_matches_dense_search(c, a1, a2, r):
    ts = np.linspace(0, 1, 20001)
    P = np.asarray(a1) + ts[:, None] * (np.asarray(a2) - np.asarray(a1))
    ok = np.hypot(*(P - c).T) <= r
    s1, s2 = _clip_start(c, a1, a2, r), _clip_end(c, a1, a2, r)
    if not ok.any():
        return
    assert s1 is not None and s2 is not None
    assert abs(s1 - ts[ok][0]) <= 1e-4 + 1e-9
    assert abs(s2 - ts[ok][-1]) <= 1e-4 + 1e-9


def test_arc_capacity_same_point(idx):
    g = idx.g
    b = GraphPoint.on_edge(g, 2, 0.3)
    a = (1.0, 1.0)
    assert edge_arc_capacity(idx, b, b, a, a, 5.0, EPS) == pytest.approx(math.dist(b.position(g), a))


def test_arc_capacity_aligned_edge():
    g = GeometricGraph([(0, 0), (4, 0), (4, 3)], [(0, 1), (1, 2)])
    mi = build_map_match_index(g, EPS, c_estimate=2.0)
    a1, a2 = (0.0, 0.2), (4.0, 0.2)
    cap = edge_arc_capacity(mi, GraphPoint.at_vertex(0), GraphPoint.at_vertex(1), a1, a2, 1.0, EPS)
    assert cap == pytest.approx(segment_frechet(g.point(0), g.point(1), a1, a2))
    assert cap == pytest.approx(0.2)


def test_arc_capacity_infeasible_clip_is_infinite(idx):
    g = idx.g
    b1 = GraphPoint.at_vertex(0)
    far = (100.0, 100.0)
    assert edge_arc_capacity(idx, b1, GraphPoint.at_vertex(1), far, far, 1.0, EPS) == math.inf


def test_capacity_dag_layers_and_monotone_feasibility(idx):
    Q = Polyline([(0.3, 0.2), (1.6, 0.8), (2.2, 2.1)])
    dag = build_capacity_dag(idx, Q, 0.6, EPS / 9)
    assert len(dag.layers) == len(Q)
    for i in range(len(Q) - 1):
        for _, _, cap in dag.arcs(i):
            assert cap >= 0
    seen = False
    for thr in np.linspace(0.05, 1.5, 12):
        ok = dag.feasible(float(thr))
        assert ok or not seen
        seen = seen or ok


def test_query_on_graph_path(idx):
    g = idx.g
    v = 0
    pts = [g.point(v)]
    prev = -1
    for _ in range(4):
        nxt = [y for y, _, _ in g.adjacency[v] if y != prev][0]
        prev, v = v, nxt
        pts.append(g.point(v))
    assert map_match_query(idx, Polyline(pts)) <= 1e-5


def test_query_single_segment_not_above_segment_query(idx):
    rng = np.random.default_rng(2)
    for _ in range(4):
        a, b = tuple(rng.uniform(0, 4, 2)), tuple(rng.uniform(0, 4, 2))
        s = segment_query(idx.seg, Segment(a, b))
        m = map_match_query(idx, Polyline([a, b]))
        exact_v = match_exact(idx.g, Polyline([a, b]), 1e-9)
        assert m <= s * (1 + EPS) * (1 + 1e-6)
        assert m <= exact_v * (1 + EPS) * (1 + 1e-6)


def test_query_details_and_sandwich(idx):
    g = idx.g
    rng = np.random.default_rng(5)
    for _ in range(3):
        Q = Polyline(rng.uniform(0.5, 3.5, (4, 2)))
        res = map_match_query(idx, Q, details=True)
        opt = match_exact(g, Q, 1e-9, endpoints="edge")
        assert opt * (1 - 1e-8) <= res.value <= (1 + EPS) * (1 + 1e-6) * opt
        assert len(res.path) == len(Q)
        assert all(math.dist(p.position(g), a) <= res.value + 1e-9 for p, a in zip(res.path, Q.points()))
        feas = [r for r, c in res.decisions if c != "b"]
        infeas = [r for r, c in res.decisions if c == "b"]
        if feas and infeas:
            assert max(infeas) < min(feas)


def test_query_rejects_bad_input(idx):
    with pytest.raises(ValueError):
        map_match_query(idx, Polyline([(0, 0)]), rel_tol=0)
