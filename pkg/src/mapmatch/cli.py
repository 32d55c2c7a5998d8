"""Command-line interface: ``mapmatch <command> ...``.

Exit codes: 0 success, 2 input error, 3 invariant violation (a sandwich
breach under ``--self-check`` or a failed gap check).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import bench as bench_mod
from .bundle import BundleError, load_bundle, read_header, save_bundle
from .freespace import match_exact
from .gadgets import GapTooLarge, OvInstance, build_gadget, random_ov, verify_gap
from .geom import Segment
from .graph import DisconnectedGraphError, generate_network
from .io import ParseError, read_graph, read_trajectory, write_geojson, write_graph, write_trajectory
from .segment_index import segment_query
from .trajectory import build_map_match_index, map_match_query

log = logging.getLogger("mapmatch")

EXIT_OK, EXIT_INPUT, EXIT_INVARIANT = 0, 2, 3


class InvariantViolation(RuntimeError):
    pass


def _sandwich(answer: float, exact: float, eps: float, rel_tol: float) -> bool:
    return exact / (1 + rel_tol) <= answer <= (1 + eps) * (1 + rel_tol) * exact


def _number(x: float) -> str:
    return repr(float(x))


# commands -------------------------------------------------------------------


def cmd_build(args) -> int:
    if not 0 < args.eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    got = read_graph(args.graph, split_components_ok=args.split_components)
    graphs = got if isinstance(got, list) else [got]
    stem, ext = os.path.splitext(args.out)
    for k, g in enumerate(graphs):
        idx = build_map_match_index(
            g, args.eps, c_estimate=args.c_estimate, rel_tol=args.rel_tol, eager=args.eager, seed=args.seed
        )
        out = args.out if len(graphs) == 1 else f"{stem}.{k}{ext}"
        header = save_bundle(idx, out, seed=args.seed)
        c = header["counts"]
        log.info(
            "built %s: p=%d pairs=%d transit sets=%d table entries=%d c=%.3g",
            out, g.complexity, c["sspd_pairs"], c["transit_sets"], c["table_entries"], header["c_estimate"],
        )
        print(out)
    return EXIT_OK


def cmd_query(args) -> int:
    idx, header = load_bundle(args.bundle)
    Q = read_trajectory(args.trajectory)
    res = map_match_query(idx, Q, rel_tol=args.rel_tol, details=True)
    print(_number(res.value))
    matched = [b.position(idx.g) for b in res.path] if res.path else None
    if args.emit_geojson:
        write_geojson(args.emit_geojson, idx.g, matched, Q)
    if args.plot:
        from .plotting import plot_match

        plot_match(idx.g, args.plot, Q, matched)
    if args.self_check:
        exact = match_exact(idx.g, Q, args.rel_tol, endpoints="edge")
        if not _sandwich(res.value, exact, header["eps"], args.rel_tol):
            raise InvariantViolation(f"answer {res.value!r} outside sandwich of exact {exact!r}")
        log.info("self-check ok: exact=%r ratio=%.6f", exact, res.value / exact if exact else float("nan"))
    return EXIT_OK


def cmd_segment_query(args) -> int:
    idx, header = load_bundle(args.bundle)
    ab = Segment(tuple(args.start), tuple(args.end))
    val = segment_query(idx.seg, ab, rel_tol=args.rel_tol)
    print(_number(val))
    return EXIT_OK


def cmd_exact(args) -> int:
    g = read_graph(args.graph)
    Q = read_trajectory(args.trajectory)
    print(_number(match_exact(g, Q, args.rel_tol, endpoints=args.endpoints)))
    return EXIT_OK


def cmd_gen(args) -> int:
    target = float("inf") if args.target_c is None else args.target_c
    g = generate_network(args.width, args.height, target, args.jitter, args.seed)
    write_graph(g, args.out)
    print(args.out)
    if args.trajectory:
        rng = np.random.default_rng(args.seed)
        Q = bench_mod.random_trajectory(g, args.q, rng, args.noise)
        write_trajectory(Q, args.trajectory)
        print(args.trajectory)
    return EXIT_OK


def _ov_from_args(args) -> OvInstance:
    force = True if args.force_yes else False if args.force_no else None
    return random_ov(args.n, args.m, args.d, seed=args.seed, force=force)


def cmd_gen_hard(args) -> int:
    ov = _ov_from_args(args)
    gi = build_gadget(ov, args.h)
    write_graph(gi.graph, args.graph_out)
    write_trajectory(gi.trajectory, args.traj_out)
    meta = {"is_yes": gi.is_yes, "h": gi.h, "d": ov.d, "A": [list(v) for v in ov.A], "B": [list(v) for v in ov.B]}
    side = args.meta_out or os.path.splitext(args.graph_out)[0] + ".meta.json"
    with open(side, "w", encoding="utf-8") as fh:
        json.dump(meta, fh)
        fh.write("\n")
    for p in (args.graph_out, args.traj_out, side):
        print(p)
    return EXIT_OK


def cmd_verify_gap(args) -> int:
    if args.meta:
        with open(args.meta, encoding="utf-8") as fh:
            meta = json.load(fh)
        ov = OvInstance(tuple(map(tuple, meta["A"])), tuple(map(tuple, meta["B"])), meta["d"])
        h = meta.get("h", args.h)
    else:
        ov, h = _ov_from_args(args), args.h
    gi = build_gadget(ov, h)
    value, ok = verify_gap(gi, args.rel_tol, cap=args.cap)
    print(f"is_yes={gi.is_yes} value={_number(value)} gap_ok={ok}")
    if not ok:
        raise InvariantViolation("gadget gap does not hold")
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            try:
                cfg = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ParseError(args.config, exc.msg, exc.lineno) from None
    cfg.setdefault("rel_tol", args.rel_tol)
    if args.no_timing:
        cfg["timing"] = False
    records = bench_mod.run_bench(cfg)
    bench_mod.write_csv(records, args.out)
    print(args.out)
    if args.plot_dir:
        from .plotting import bench_figures

        for p in bench_figures(bench_mod.read_csv(args.out), args.plot_dir):
            print(p)
    if args.self_check:
        tol = cfg["rel_tol"]
        bad = [r for r in records if r.exact_answer is not None and not _sandwich(r.answer, r.exact_answer, r.eps, tol)]
        if bad:
            raise InvariantViolation(f"{len(bad)} rows outside the sandwich, first {bad[0].instance_id}")
    return EXIT_OK


def cmd_info(args) -> int:
    print(json.dumps({k: v for k, v in read_header(args.bundle).items() if k != "sections"}, indent=2, sort_keys=True))
    return EXIT_OK


# parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    common.add_argument("--rel-tol", type=float, default=1e-6, help="bisection tolerance (default 1e-6)")
    common.add_argument("--log-level", default="WARNING", help="logging level (default WARNING)")

    ap = argparse.ArgumentParser(prog="mapmatch", description="Approximate map matching under the Fréchet distance.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", parents=[common], help="preprocess a graph into an index bundle")
    p.add_argument("graph")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--c-estimate", type=float, default=None, help="skip the packedness estimate")
    p.add_argument("--eager", action="store_true", help="fill every transit set and distance now")
    p.add_argument("--split-components", action="store_true", help="one bundle per connected component")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("query", parents=[common], help="approximate map matching of a trajectory")
    p.add_argument("bundle")
    p.add_argument("trajectory")
    p.add_argument("--emit-geojson", metavar="PATH")
    p.add_argument("--plot", metavar="PNG")
    p.add_argument("--self-check", action="store_true", help="compare against the exact matcher")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("segment-query", parents=[common], help="approximate matching of one segment")
    p.add_argument("bundle")
    p.add_argument("--from", dest="start", type=float, nargs=2, required=True, metavar=("X", "Y"))
    p.add_argument("--to", dest="end", type=float, nargs=2, required=True, metavar=("X", "Y"))
    p.set_defaults(func=cmd_segment_query)

    p = sub.add_parser("exact", parents=[common], help="exact map matching without an index")
    p.add_argument("graph")
    p.add_argument("trajectory")
    p.add_argument("--endpoints", choices=("vertex", "edge"), default="edge")
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("gen", parents=[common], help="generate a jittered-grid road network")
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--target-c", type=float, default=None)
    p.add_argument("--jitter", type=float, default=0.2)
    p.add_argument("--out", required=True)
    p.add_argument("--trajectory", metavar="PATH", help="also write a random-walk trajectory")
    p.add_argument("--q", type=int, default=10)
    p.add_argument("--noise", type=float, default=0.15)
    p.set_defaults(func=cmd_gen)

    for name, func, helptext in (
        ("gen-hard", cmd_gen_hard, "generate an orthogonal-vectors hard instance"),
        ("verify-gap", cmd_verify_gap, "check the YES/NO gap of a hard instance exactly"),
    ):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--n", type=int, default=2)
        p.add_argument("--m", type=int, default=2)
        p.add_argument("--d", type=int, default=2)
        p.add_argument("--h", type=float, default=None)
        grp = p.add_mutually_exclusive_group()
        grp.add_argument("--force-yes", action="store_true")
        grp.add_argument("--force-no", action="store_true")
        p.set_defaults(func=func)
    gen_hard = sub.choices["gen-hard"]
    gen_hard.add_argument("--graph-out", required=True)
    gen_hard.add_argument("--traj-out", required=True)
    gen_hard.add_argument("--meta-out", default=None)
    vg = sub.choices["verify-gap"]
    vg.add_argument("--meta", help="sidecar written by gen-hard")
    vg.add_argument("--cap", type=int, default=200_000, help="refuse instances with |P|*|Q| above this")

    p = sub.add_parser("bench", parents=[common], help="run the benchmark and write a CSV")
    p.add_argument("--config", help="JSON config; omitted means an empty run")
    p.add_argument("--out", required=True)
    p.add_argument("--plot-dir", help="write scaling and ratio figures here")
    p.add_argument("--no-timing", action="store_true", help="blank the timing columns")
    p.add_argument("--self-check", action="store_true", help="fail on any sandwich breach")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("info", parents=[common], help="print a bundle header")
    p.add_argument("bundle")
    p.set_defaults(func=cmd_info)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    if not args.rel_tol > 0:
        print("error: --rel-tol must be positive", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (ParseError, BundleError, DisconnectedGraphError, GapTooLarge, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
