"""One test per acceptance criterion, each printing a single PASS/FAIL line."""

import math
import time

import numpy as np
import pytest
from scipy.sparse.csgraph import dijkstra

from mapmatch.bench import random_trajectory, read_csv, records_to_csv, run_bench, write_csv
from mapmatch.bundle import load_bundle, save_bundle
from mapmatch.freespace import match_exact, match_fixed_endpoints
from mapmatch.gadgets import base_curve, build_gadget, random_ov, verify_gap
from mapmatch.geom import Polyline, Segment, frechet_distance
from mapmatch.graph import estimate_packedness, generate_network
from mapmatch.segment_index import build_segment_index, candidate_vertices, segment_query
from mapmatch.trajectory import build_map_match_index, build_trough_index, candidate_points, map_match_query
from mapmatch.transit import build_transit_index, separates, straightest_path_query

pytestmark = pytest.mark.acceptance

EPS = 0.25
TOL = 1e-6


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail, elapsed, budget):
        ok = ok and elapsed < budget
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {n}: {detail} ({elapsed:.2f}s, budget {budget:g}s)")
        return ok

    return emit


def test_criterion_01_base_curve_constants(report):
    t0 = time.perf_counter()
    h = 0.01
    want = {("0_A", "0_B"): 1.0, ("0_A", "1_B"): 1.0, ("1_A", "0_B"): 1.0, ("1_A", "1_B"): 3.0}
    got = {k: frechet_distance(base_curve(k[0], h), base_curve(k[1], h), 1e-9) for k in want}
    err = max(abs(got[k] - want[k]) for k in want)
    ok = report(1, err <= 1e-5, f"max |d_F - expected| = {err:.2e}", time.perf_counter() - t0, 1)
    assert ok


def test_criterion_02_vertex_pair_sandwich(report):
    t0 = time.perf_counter()
    worst, zero_noise, n = 0.0, 0.0, 0
    sizes = [(5, 6), (5, 7), (5, 8), (6, 7), (6, 8)]
    for k in range(10):
        w, h = sizes[k % len(sizes)]
        g = generate_network(w, h, seed=k)
        assert 60 <= g.complexity <= 150
        idx = build_transit_index(g, estimate_packedness(g).c_estimate)
        rng = np.random.default_rng(k)
        for _ in range(100):
            u, v = (int(x) for x in rng.choice(g.n_vertices, 2, replace=False))
            opt = match_fixed_endpoints(g, u, v, Segment(g.point(u), g.point(v)), 1e-9)
            ans = straightest_path_query(idx, u, v)
            assert opt * (1 - 1e-9) <= ans, (k, u, v)
            if opt > 0:
                worst = max(worst, ans / opt)
            else:
                # an edge matched to itself; the answer may carry rounding noise
                zero_noise = max(zero_noise, ans)
            n += 1
    ok = report(
        2, worst <= 3 * (1 + TOL) and zero_noise <= 1e-12,
        f"{n} pairs, worst ratio {worst:.4f} <= 3, largest answer at opt = 0: {zero_noise:.1e}",
        time.perf_counter() - t0, 120,
    )
    assert ok


def test_criterion_03_transit_cuts(report):
    t0 = time.perf_counter()
    pairs, bad_sep, bad_size = 0, 0, 0
    for seed in range(5):
        g = generate_network(6, 7, seed=seed)
        c = estimate_packedness(g).c_estimate
        idx = build_transit_index(g, c)
        for k in range(idx.sspd.n_pairs):
            p = idx.sspd.pair(k)
            ts = idx.transit_set(k)
            bad_sep += not separates(g, p.side_a, p.side_b, ts.cut_vertices)
            bad_size += len(ts.cut_vertices) > 2 * c
            pairs += 1
    ok = report(
        3, bad_sep == 0 and bad_size == 0, f"{pairs} pairs, {bad_sep} non-separating, {bad_size} oversized",
        time.perf_counter() - t0, 120,
    )
    assert ok


def test_criterion_04_segment_sandwich(report):
    t0 = time.perf_counter()
    worst, n = 0.0, 0
    for k in range(10):
        g = generate_network(5, 6, seed=20 + k)
        idx = build_segment_index(g, EPS)
        rng = np.random.default_rng(k)
        x0, y0, x1, y1 = g.bbox()
        for _ in range(50):
            a = (rng.uniform(x0, x1), rng.uniform(y0, y1))
            b = (rng.uniform(x0, x1), rng.uniform(y0, y1))
            ans = segment_query(idx, Segment(a, b))
            opt = match_exact(g, Polyline([a, b]), 1e-9, endpoints="vertex")
            assert opt * (1 - 1e-8) <= ans, (k, a, b)
            worst = max(worst, ans / opt)
            n += 1
    ok = report(4, worst <= (1 + EPS) * (1 + TOL), f"{n} segments, worst ratio {worst:.4f}", time.perf_counter() - t0, 300)
    assert ok


def test_criterion_05_trajectory_sandwich(report):
    t0 = time.perf_counter()
    worst, n = 0.0, 0
    for k in range(5):
        g = generate_network(5, 8, seed=40 + k)
        assert 80 <= g.complexity <= 120
        idx = build_map_match_index(g, EPS)
        rng = np.random.default_rng(k)
        for j in range(10):
            Q = random_trajectory(g, 4 + j % 9, rng, 0.2)
            ans = map_match_query(idx, Q)
            opt = match_exact(g, Q, 1e-9, endpoints="edge")
            assert opt * (1 - 1e-8) <= ans, (k, j)
            worst = max(worst, ans / opt)
            n += 1
    ok = report(5, worst <= (1 + EPS) * (1 + TOL), f"{n} trajectories, worst ratio {worst:.4f}", time.perf_counter() - t0, 600)
    assert ok


def _point_distances(g, D, points):
    """Graph distance from every vertex to each graph point, shape (n, len(points))."""
    out = np.empty((g.n_vertices, len(points)))
    for k, b in enumerate(points):
        out[:, k] = np.min([D[:, a] + off for a, off in b.anchors(g)], axis=0)
    return out


def _edge_coverage_gap(g, D, points, c, r, spacing=1e-3):
    """Largest graph distance from a sampled edge point in the square to ``points``."""
    Dv = _point_distances(g, D, points)
    on_edge = np.array([-1 if b.edge is None else b.edge for b in points])
    t_edge = np.array([b.t for b in points])
    worst = 0.0
    for e, (i, j) in enumerate(g.edges.tolist()):
        L = float(g.edge_lengths[e])
        s = np.append(np.arange(0.0, L, spacing) / L, 1.0)
        pos = g.xy[i] + s[:, None] * (g.xy[j] - g.xy[i])
        inside = np.all(np.abs(pos - c) <= r, axis=1)
        if not inside.any():
            continue
        s = s[inside]
        d = np.minimum(s[:, None] * L + Dv[i], (1 - s[:, None]) * L + Dv[j])
        same = on_edge == e
        if same.any():
            d[:, same] = np.minimum(d[:, same], np.abs(s[:, None] - t_edge[same]) * L)
        worst = max(worst, float((d.min(axis=1) / r).max()))
    return worst


def test_criterion_06_candidate_coverage(report):
    t0 = time.perf_counter()
    worst_v = worst_e = 0.0
    squares = 0
    for k in range(4):
        g = generate_network(5, 8, seed=60 + k)
        assert g.n_vertices == 40
        idx = build_map_match_index(g, EPS)
        D = dijkstra(g.csr(), directed=False)
        rng = np.random.default_rng(k)
        x0, y0, x1, y1 = g.bbox()
        for _ in range(50):
            c = np.array([rng.uniform(x0, x1), rng.uniform(y0, y1)])
            r = float(rng.uniform(0.2, 3.0))
            T = list(candidate_vertices(idx.seg, c, r, EPS))
            inside = np.flatnonzero(np.all(np.abs(g.xy - c) <= r, axis=1))
            if len(inside):
                worst_v = max(worst_v, float(D[np.ix_(inside, T)].min(axis=1).max() / r) if T else math.inf)
            P = candidate_points(idx, c, r, EPS).points
            worst_e = max(worst_e, _edge_coverage_gap(g, D, P, c, r) if P else math.inf)
            squares += 1
    ok = report(
        6, worst_v <= EPS + 1e-12 and worst_e <= EPS + 1e-9,
        f"{squares} squares, worst vertex gap {worst_v:.4f}r, worst edge gap {worst_e:.4f}r (limit {EPS}r)",
        time.perf_counter() - t0, 120,
    )
    assert ok


def test_criterion_07_trough_stabbing(report):
    t0 = time.perf_counter()
    mismatches, worst, limit = 0, 0, math.inf
    stabs = 0
    for seed in (1, 2):
        g = generate_network(10, 10, target_c=20, seed=seed)
        c = estimate_packedness(g).c_estimate
        limit = min(limit, 50 * c / EPS)
        tix = build_trough_index(g, EPS)
        rng = np.random.default_rng(seed)
        x0, y0, x1, y1 = g.bbox()
        zmax = max(t.z_max for t in tix.troughs)
        for _ in range(500):
            x, y = rng.uniform(x0 - 1, x1 + 1), rng.uniform(y0 - 1, y1 + 1)
            z = rng.uniform(0, zmax * 1.05)
            got = tix.stab(x, y, z)
            mismatches += sorted(got) != sorted(tix.stab_linear(x, y, z))
            worst = max(worst, len(got))
            stabs += 1
    ok = report(
        7, mismatches == 0 and worst <= limit, f"{stabs} stabs, {mismatches} mismatches, max report {worst} <= {limit:.1f}",
        time.perf_counter() - t0, 60,
    )
    assert ok


def test_criterion_08_gadget_gap(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    yes_worst, no_worst, counts = 0.0, math.inf, [0, 0]
    for k in range(20):
        n, m, d = (int(x) for x in (rng.integers(1, 5), rng.integers(1, 5), rng.integers(2, 4)))
        gi = build_gadget(random_ov(n, m, d, seed=k, force=bool(k % 2)))
        value, _ = verify_gap(gi, 1e-7)
        counts[gi.is_yes] += 1
        if gi.is_yes:
            yes_worst = max(yes_worst, value)
        else:
            no_worst = min(no_worst, value)
    ok = report(
        8, yes_worst <= 1.001 * (1 + TOL) and no_worst >= 3 * (1 - TOL),
        f"{counts[1]} YES max {yes_worst:.6f}, {counts[0]} NO min {no_worst:.6f}", time.perf_counter() - t0, 300,
    )
    assert ok


def test_criterion_09_scaling(report, tmp_path):
    t0 = time.perf_counter()
    cfg = {
        "sizes": [[9, 9], [13, 13], [18, 18], [25, 25]],
        "seeds": [0, 1, 2],
        "q": 10,
        "queries": 3,
        "c_estimate": 30.0,
        "exact_repeats": 3,
        "repeats": 3,
        "exact_cap": 10**9,
    }
    path = tmp_path / "bench_scaling.csv"
    write_csv(run_bench(cfg), path)
    rows = read_csv(path)
    # seeds give slightly different p per grid size, so group by size class
    groups = {}
    for r in rows:
        groups.setdefault(r["instance_id"].split("-")[0], []).append(r)
    classes = sorted(groups.values(), key=lambda rs: np.median([r["p"] for r in rs]))
    ps = [int(np.median([r["p"] for r in rs])) for rs in classes]
    med = lambda key: [float(np.median([r[key] for r in rs])) for rs in classes]
    qt, et = med("query_ms"), med("exact_ms")
    # per-doubling growth, normalised by the actual size ratio
    grow = lambda t: [(t[k + 1] / t[k]) ** (1 / math.log2(ps[k + 1] / ps[k])) for k in range(len(ps) - 1)]
    gq, ge = grow(qt), grow(et)
    ok = report(
        9, max(gq) <= 2 * 1.5 and min(ge) >= 1.8 / 1.5,
        f"p={ps}, indexed growth {[round(x, 2) for x in gq]} <= 3, exact growth {[round(x, 2) for x in ge]} >= 1.2",
        time.perf_counter() - t0, 900,
    )
    assert ok


def test_criterion_10_determinism_and_persistence(report, tmp_path):
    t0 = time.perf_counter()
    cfg = {"sizes": [[5, 5], [6, 6]], "seeds": [0, 1], "queries": 2, "q": 6, "timing": False}
    a, b = records_to_csv(run_bench(cfg)), records_to_csv(run_bench(cfg))
    same_csv = a == b and a.count("\n") == 9
    g = generate_network(6, 6, seed=4)
    idx = build_map_match_index(g, EPS)
    rng = np.random.default_rng(4)
    Qs = [random_trajectory(g, 6, rng, 0.2) for _ in range(5)]
    path = tmp_path / "idx.mmb"
    save_bundle(idx, path, seed=4)
    fresh = [map_match_query(idx, Q) for Q in Qs]
    loaded, _ = load_bundle(path)
    again = [map_match_query(loaded, Q) for Q in Qs]
    save_bundle(idx, path, seed=4)
    warm, _ = load_bundle(path)
    warm_again = [map_match_query(warm, Q) for Q in Qs]
    same_q = fresh == again == warm_again
    ok = report(
        10, same_csv and same_q, f"bench CSV identical: {same_csv}, bundle queries identical: {same_q}",
        time.perf_counter() - t0, 60,
    )
    assert ok
