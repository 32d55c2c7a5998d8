import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.sparse.csgraph import dijkstra

from mapmatch.freespace import match_exact, match_fixed_endpoints
from mapmatch.geom import Polyline, Segment
from mapmatch.graph import GeometricGraph, generate_network
from mapmatch.segment_index import (
    GridStore,
    build_cluster_hierarchy,
    build_segment_index,
    candidate_vertices,
    query_fixed_endpoints_eps,
    segment_query,
)

EPS = 0.25


@pytest.fixture(scope="module")
def idx30():
    return build_segment_index(generate_network(5, 6, seed=2), EPS)


def all_pairs(g):
    return dijkstra(g.csr(), directed=False)


def test_grid_store_degenerate_base():
    g = GeometricGraph([(0, 0), (1, 0)], [(0, 1)])
    gs = GridStore(g, 0, 1, EPS, 0.0)
    assert gs.scales == []
    assert gs.value((0.1, 0.2), (1.0, -0.3)) == pytest.approx(0.3)


def test_grid_store_self_consistency(idx30):
    g = idx30.g
    tr = idx30.transit
    for k in range(0, tr.sspd.n_pairs, 9):
        for u, w in tr.transit_keys(k)[:3]:
            if u == w:
                continue
            base = tr.table.get(u, w)
            val = idx30.grid_value(u, w, g.point(u), g.point(w), EPS)
            assert base * (1 - 1e-8) <= val <= (1 + EPS) * (1 + 1e-6) * base + 1e-12


def test_grid_store_random_segments(idx30):
    g = idx30.g
    tr = idx30.transit
    rng = np.random.default_rng(4)
    keys = [key for k in range(tr.sspd.n_pairs) for key in tr.transit_keys(k) if key[0] != key[1]]
    for _ in range(50):
        u, w = keys[int(rng.integers(len(keys)))]
        a = np.add(g.point(u), rng.normal(0, 0.3, 2))
        t = np.add(g.point(w), rng.normal(0, 0.3, 2))
        opt = match_fixed_endpoints(g, u, w, Segment(tuple(a), tuple(t)), 1e-9)
        val = idx30.grid_value(u, w, tuple(a), tuple(t), EPS)
        assert opt * (1 - 1e-8) <= val <= (1 + EPS) * (1 + 1e-6) * opt + 1e-9


def test_hierarchy_path_example():
    g = GeometricGraph([(0, 0), (1, 0), (2, 0)], [(0, 1), (1, 2)])
    h = build_cluster_hierarchy(g)
    assert h.order.tolist() == [0, 2, 1]
    assert h.radii.tolist() == [2.0, 1.0, 0.0]


@pytest.mark.parametrize("seed", range(3))
def test_hierarchy_radii_match_brute_force(seed):
    g = generate_network(5, 5, seed=seed)
    h = build_cluster_hierarchy(g)
    D = all_pairs(g)
    assert np.all(np.diff(h.radii) <= 0)
    for k in range(len(h)):
        centers = h.order[: k + 1]
        assert h.radii[k] == pytest.approx(D[centers].min(axis=0).max(), abs=1e-12)


_IDX = build_segment_index(generate_network(6, 6, seed=7), EPS)


@settings(max_examples=80, deadline=None)
@given(st.floats(-1, 7), st.floats(-1, 7), st.floats(0.05, 4), st.floats(0, 5))
def test_range_index_equals_linear_scan(x, y, half, thr):
    ri = _IDX.range_index
    got = ri.query((x, y), half, thr)
    P = ri.points
    scan = [i for i in range(len(P)) if abs(P[i, 0] - x) <= half and abs(P[i, 1] - y) <= half and P[i, 2] >= thr]
    assert got == scan


def test_candidates_single_vertex():
    g = GeometricGraph([(0.5, 0.5)], [])
    idx = build_segment_index(g, EPS, c_estimate=1.0)
    assert list(candidate_vertices(idx, (0.5, 0.5), 1.0, EPS)) == [0]


def test_candidates_dense_cluster():
    rng = np.random.default_rng(0)
    xy = [(0.0, 0.0)] + [tuple(rng.uniform(-0.01, 0.01, 2)) for _ in range(10)]
    g = GeometricGraph(xy, [(0, i) for i in range(1, 11)])
    idx = build_segment_index(g, EPS, c_estimate=10.0)
    T = candidate_vertices(idx, (0, 0), 1.0, EPS)
    assert 1 <= len(T) <= 2


def test_candidates_reject_nonpositive_r():
    with pytest.raises(ValueError):
        candidate_vertices(_IDX, (0, 0), 0.0, EPS)


@pytest.mark.parametrize("seed", range(2))
def test_candidate_coverage_exhaustive(seed):
    g = generate_network(5, 8, seed=seed)
    idx = build_segment_index(g, EPS)
    D = all_pairs(g)
    rng = np.random.default_rng(seed)
    for _ in range(40):
        c = rng.uniform(0, 5, 2)
        r = float(rng.uniform(0.2, 3))
        T = list(candidate_vertices(idx, c, r, EPS))
        inside = [v for v in range(g.n_vertices) if np.all(np.abs(g.xy[v] - c) <= r)]
        for v in inside:
            assert T and D[v, T].min() <= EPS * r + 1e-12


def test_fixed_eps_on_edge_is_zero(idx30):
    g = idx30.g
    i, j = g.edges[0]
    ab = Segment(g.point(int(i)), g.point(int(j)))
    assert query_fixed_endpoints_eps(idx30, int(i), int(j), ab) <= 1e-9


def test_fixed_eps_sandwich(idx30):
    g = idx30.g
    rng = np.random.default_rng(3)
    for _ in range(60):
        u, v = (int(x) for x in rng.choice(g.n_vertices, 2, replace=False))
        a = np.add(g.point(u), rng.normal(0, 0.4, 2))
        b = np.add(g.point(v), rng.normal(0, 0.4, 2))
        ab = Segment(tuple(a), tuple(b))
        opt = match_fixed_endpoints(g, u, v, ab, 1e-9)
        val = query_fixed_endpoints_eps(idx30, u, v, ab)
        assert opt * (1 - 1e-8) <= val <= (1 + EPS) * (1 + 1e-6) * opt + 1e-9


def test_fixed_eps_parallel_offset():
    g = GeometricGraph([(float(i), 0.0) for i in range(8)], [(i, i + 1) for i in range(7)])
    idx = build_segment_index(g, EPS, c_estimate=2.0)
    ab = Segment((0.0, 0.1), (7.0, 0.1))
    assert query_fixed_endpoints_eps(idx, 0, 7, ab) == pytest.approx(0.1, rel=1e-6)


def test_segment_query_on_edge(idx30):
    g = idx30.g
    i, j = g.edges[3]
    assert segment_query(idx30, Segment(g.point(int(i)), g.point(int(j)))) <= 1e-6


@pytest.mark.parametrize("seed", range(2))
def test_segment_query_sandwich(seed):
    g = generate_network(5, 6, seed=seed + 10)
    idx = build_segment_index(g, EPS)
    rng = np.random.default_rng(seed)
    x0, y0, x1, y1 = g.bbox()
    for _ in range(15):
        a = (rng.uniform(x0, x1), rng.uniform(y0, y1))
        b = (rng.uniform(x0, x1), rng.uniform(y0, y1))
        trace = []
        ans = segment_query(idx, Segment(a, b), trace=trace)
        opt = match_exact(g, Polyline([a, b]), 1e-9)
        assert opt * (1 - 1e-8) <= ans <= (1 + EPS) * (1 + 1e-6) * opt
        # decisions along the bisection are monotone in r
        feas = [r for r, case in trace if case != "b"]
        infeas = [r for r, case in trace if case == "b"]
        if feas and infeas:
            assert max(infeas) < min(feas)


def test_segment_query_far_away(idx30):
    g = idx30.g
    x0, y0, x1, y1 = g.bbox()
    D = 40.0
    ab = Segment((x1 + D, y0), (x1 + D, y0 + 0.5))
    ans = segment_query(idx30, ab)
    brute = min(
        match_fixed_endpoints(g, u, v, ab, 1e-9) for u in range(g.n_vertices) for v in range(g.n_vertices)
    )
    assert brute * (1 - 1e-8) <= ans <= (1 + EPS) * (1 + 1e-6) * brute
    assert ans >= D * (1 - EPS)
