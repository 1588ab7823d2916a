"""Command-line entry point: ``stsjoin {gen,build,join,oracle,bench}``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .errors import StsJoinError
from .harness import (
    PipelineConfig, StageError, SyntheticSpec, companion_queries, format_results,
    generate_synthetic, load_trajectories, oracle_join, prepare_data, run_pipeline,
    space_bounds, write_trajectories,
)
from .index import IndexConfig, StsIndex, trajectory_refs
from .join import QueryParams, join_report

log = logging.getLogger("stsjoin")

MODE_FLAGS = {"plain": "plain", "backtrack": "backtrack", "backtrack-bound": "backtrack+bound"}


def _emit(text: str, path):
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _thresholds(p):
    p.add_argument("--delta-d", type=float, default=20.0, help="distance threshold, metres")
    p.add_argument("--delta-t", type=float, default=20.0, help="time threshold, seconds")


def _pipeline_flags(p):
    _thresholds(p)
    p.add_argument("--theta-sp", type=float, default=20.0, help="simplification threshold, metres")
    p.add_argument("--theta-ob", type=float, default=20.0, help="obfuscation bound, metres")
    p.add_argument("--noise-b", type=float, default=None, help="noise scale (default theta_ob/3)")
    p.add_argument("--btree-cap", type=int, default=100)
    p.add_argument("--quad-cap", type=int, default=4)
    p.add_argument("--leaf-interval-s", type=float, default=1800)
    p.add_argument("--bitmap-interval-s", type=float, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)


def _config(a, mode) -> PipelineConfig:
    params = QueryParams(a.delta_d, a.delta_t, a.theta_sp, a.theta_ob, MODE_FLAGS[mode])
    return PipelineConfig(params, a.noise_b, a.btree_cap, a.quad_cap, a.leaf_interval_s,
                          a.bitmap_interval_s, a.seed, a.workers)


def cmd_gen(a):
    spec = SyntheticSpec(a.clients, a.trajs_per_client, a.points, a.side, a.horizon_s,
                         a.clusters, tuple(a.speed), seed=a.seed)
    data = generate_synthetic(spec)
    write_trajectories(a.out, data)
    if a.queries:
        write_trajectories(a.queries_out, companion_queries(data, a.queries, a.seed))
    return 0


def cmd_build(a):
    data = load_trajectories(a.data)
    cfg = _config(a, "backtrack")
    published = prepare_data(data, cfg)
    config = IndexConfig(space_bounds(data, a.theta_ob), a.btree_cap, a.quad_cap,
                         a.leaf_interval_s, a.bitmap_interval_s)
    index = StsIndex(config)
    for tr, ranges in published:
        for ref in trajectory_refs(tr, ranges):
            index.insert_segment(ref)
    _emit(index.stats_text(), a.metrics_out)
    return 0


def cmd_join(a):
    data, queries = load_trajectories(a.data), load_trajectories(a.queries)
    res = run_pipeline(data, queries, _config(a, a.mode))
    _emit(format_results(res.rows), a.out)
    if a.metrics_out:
        _emit(res.metrics.to_text(), a.metrics_out)
    return 0


def cmd_oracle(a):
    data, queries = load_trajectories(a.data), load_trajectories(a.queries)
    _emit(format_results(oracle_join(data, queries, a.delta_d, a.delta_t)), a.out)
    return 0


def cmd_bench(a):
    data, queries = load_trajectories(a.data), load_trajectories(a.queries)
    runs, outputs = {}, {}
    for mode in MODE_FLAGS:
        res = run_pipeline(data, queries, _config(a, mode))
        runs[mode], outputs[mode] = res.metrics, res.rows
    text = join_report(runs)
    first = outputs["plain"]
    agree = all(rows == first for rows in outputs.values())
    text += f"modes_agree={agree}\n"
    if a.check_oracle:
        ref = oracle_join(data, queries, a.delta_d, a.delta_t)
        match = [r[:3] for r in ref] == [r[:3] for r in first] and all(
            abs(x[3] - y[3]) <= 1e-6 for x, y in zip(ref, first))
        text += f"oracle_match={match}\n"
        agree = agree and match
    _emit(text, a.metrics_out)
    return 0 if agree else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stsjoin", description="Sub-trajectory similarity join toolkit")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write a synthetic trajectory set")
    g.add_argument("--clients", type=int, default=10)
    g.add_argument("--trajs-per-client", type=int, default=10)
    g.add_argument("--points", type=int, default=51)
    g.add_argument("--side", type=float, default=10_000.0)
    g.add_argument("--horizon-s", type=float, default=7200.0)
    g.add_argument("--clusters", type=int, default=0, help="Gaussian centres, 0 for uniform")
    g.add_argument("--speed", type=float, nargs=2, default=(1.0, 12.0), metavar=("MIN", "MAX"))
    g.add_argument("--queries", type=int, default=0, help="also write this many companion queries")
    g.add_argument("--queries-out", default="queries.csv")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    b = sub.add_parser("build", help="build the index and dump its statistics")
    b.add_argument("--data", required=True)
    _pipeline_flags(b)
    b.add_argument("--metrics-out", default="-")
    b.set_defaults(func=cmd_build)

    j = sub.add_parser("join", help="run the full pipeline")
    j.add_argument("--data", required=True)
    j.add_argument("--queries", required=True)
    _pipeline_flags(j)
    j.add_argument("--mode", choices=list(MODE_FLAGS), default="backtrack-bound")
    j.add_argument("--out", default="-")
    j.add_argument("--metrics-out", default=None)
    j.set_defaults(func=cmd_join)

    o = sub.add_parser("oracle", help="brute-force nested-loop join")
    o.add_argument("--data", required=True)
    o.add_argument("--queries", required=True)
    _thresholds(o)
    o.add_argument("--out", default="-")
    o.set_defaults(func=cmd_oracle)

    k = sub.add_parser("bench", help="run every mode and compare counters")
    k.add_argument("--data", required=True)
    k.add_argument("--queries", required=True)
    _pipeline_flags(k)
    k.add_argument("--check-oracle", action="store_true")
    k.add_argument("--metrics-out", default="-")
    k.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    a = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return a.func(a)
    except StageError as e:
        print(f"stsjoin: stage {e}", file=sys.stderr)
        return 2
    except (StsJoinError, OSError) as e:
        print(f"stsjoin: {a.command}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
