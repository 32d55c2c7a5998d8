import numpy as np
import pytest

from mapmatch.bench import BenchRecord, random_trajectory, read_csv, records_to_csv, run_bench, write_csv
from mapmatch.graph import generate_network

SMALL = {"sizes": [[4, 4], [4, 5]], "seeds": [0, 1, 2], "q": 4, "timing": False}


@pytest.fixture(scope="module")
def small_records():
    return run_bench(SMALL)


def test_empty_config_gives_header_only():
    text = records_to_csv(run_bench({}))
    assert text == ",".join(f for f in BenchRecord.__dataclass_fields__) + "\n"


def test_one_row_per_size_and_seed(small_records):
    assert len(small_records) == 6
    ids = [r.instance_id for r in small_records]
    assert len(set(ids)) == 6
    assert all(r.q == 4 and r.eps == 0.25 for r in small_records)


def test_ratios_within_sandwich(small_records):
    for r in small_records:
        assert r.exact_answer is not None
        # both values come from bisection at rel_tol 1e-6
        assert 1 / (1 + 1e-6) <= r.ratio <= 1.25 * (1 + 1e-6)


def test_timing_off_is_deterministic(small_records, tmp_path):
    again = run_bench(SMALL)
    assert records_to_csv(again) == records_to_csv(small_records)
    assert all(r.build_ms is None and r.query_ms is None and r.exact_ms is None for r in again)
    write_csv(again, tmp_path / "b.csv")
    rows = read_csv(tmp_path / "b.csv")
    assert [row["answer"] for row in rows] == [r.answer for r in again]
    assert rows[0]["query_ms"] is None


def test_timing_on_fills_columns():
    (rec,) = run_bench({"sizes": [[4, 4]], "q": 3})
    assert rec.build_ms >= 0 and rec.query_ms >= 0 and rec.exact_ms >= 0


def test_exact_cap_skips_baseline():
    (rec,) = run_bench({"sizes": [[4, 4]], "q": 3, "exact_cap": 1, "timing": False})
    assert rec.exact_answer is None and rec.ratio is None


def test_random_trajectory_walks_the_graph():
    g = generate_network(4, 4, seed=3)
    Q = random_trajectory(g, 7, np.random.default_rng(0), noise=0.0)
    assert len(Q) == 7
    verts = {tuple(p) for p in g.xy.tolist()}
    assert all(tuple(p) in verts for p in Q.vertices.tolist())
    with pytest.raises(ValueError):
        random_trajectory(g, 0, np.random.default_rng(0))
