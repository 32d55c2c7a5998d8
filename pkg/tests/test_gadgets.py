import itertools

import pytest

from mapmatch.gadgets import GapTooLarge, OvInstance, base_curve, build_gadget, random_ov, verify_gap
from mapmatch.geom import frechet_distance
from mapmatch.graph import proper_crossings


def test_base_curve_vertices():
    assert base_curve("1_A", 0.01).points() == [
        (0.0, 0.0), (12.0, 0.0), (12.0, 0.01), (6.0, 0.01), (6.0, 0.02), (18.0, 0.02)
    ]
    with pytest.raises(ValueError):
        base_curve("2_A", 0.01)
    with pytest.raises(ValueError):
        base_curve("1_A", 0.0)


@pytest.mark.parametrize(
    "a,b,expected", [("0_A", "0_B", 1.0), ("0_A", "1_B", 1.0), ("1_A", "0_B", 1.0), ("1_A", "1_B", 3.0)]
)
def test_base_curve_distances(a, b, expected):
    h = 0.01
    assert frechet_distance(base_curve(a, h), base_curve(b, h), 1e-9) == pytest.approx(expected, abs=1e-6)


def test_ov_validation_and_brute_force():
    with pytest.raises(ValueError):
        OvInstance(((1, 0),), ((1,),), 2)
    with pytest.raises(ValueError):
        OvInstance(((2,),), ((1,),), 1)
    assert OvInstance(((1,),), ((0,),), 1).is_yes
    assert not OvInstance(((1,),), ((1,),), 1).is_yes


@pytest.mark.parametrize("seed", range(5))
def test_random_ov_matches_brute_force(seed):
    ov = random_ov(3, 3, 3, seed=seed)
    brute = any(all(x * y == 0 for x, y in zip(a, b)) for a, b in itertools.product(ov.A, ov.B))
    assert ov.is_yes == brute
    assert random_ov(3, 3, 3, seed=seed, force=True).is_yes
    assert not random_ov(3, 3, 3, seed=seed, force=False).is_yes


@pytest.mark.parametrize("n,m,d", [(1, 1, 2), (2, 3, 2), (3, 2, 3), (4, 4, 2)])
def test_gadget_shape(n, m, d):
    gi = build_gadget(random_ov(n, m, d, seed=n * 10 + m))
    g = gi.graph
    assert g.is_connected()
    assert gi.h == pytest.approx(0.0001 / n)
    # |P| grows like d * n and |Q| like d * m
    assert g.n_vertices <= 6 * d * (n + 2) + 8
    assert 5 * d * m <= len(gi.trajectory) <= 6 * d * m + 4 * m + 2
    # T_1 sits on the line y = 3h of U's return edge, so that edge is the only
    # one meeting others away from shared endpoints, and only along y = 3h
    ret = _return_edge(gi)
    for e, f in proper_crossings(g):
        assert ret in (e, f)
        other = f if e == ret else e
        assert 3 * gi.h in g.xy[g.edges[other]][:, 1]


def _return_edge(gi):
    g, d, h = gi.graph, gi.ov.d, gi.h
    ends = {(36.0 * d, 3 * h), (0.0, 3 * h)}
    return next(k for k, (i, j) in enumerate(g.edges.tolist()) if {g.point(i), g.point(j)} == ends)


def test_gadget_h_override():
    gi = build_gadget(random_ov(2, 2, 2, seed=0), h=0.001)
    assert gi.h == 0.001


def test_verify_gap_yes_and_no():
    yes = OvInstance(((1, 0), (0, 1)), ((1, 1), (1, 0)), 2)
    assert yes.is_yes
    val, ok = verify_gap(build_gadget(yes))
    assert ok and val <= 1.001
    no = OvInstance(((1, 1), (1, 1)), ((1, 1), (1, 1)), 2)
    val, ok = verify_gap(build_gadget(no))
    assert ok and val >= 3 * (1 - 1e-6)


def test_verify_gap_refuses_over_cap():
    with pytest.raises(GapTooLarge):
        verify_gap(build_gadget(random_ov(2, 2, 2, seed=1)), cap=10)
