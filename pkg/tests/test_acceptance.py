"""Acceptance criteria, one test each, at their stated tolerances.

Every test records a PASS/FAIL line that is printed in the terminal summary.
"""
import time
from collections import Counter

import numpy as np
import pytest
from scipy import stats

from stsjoin.cost import (
    CostParams, expected_backtrack_distance, expected_backtrack_distance_sum,
    measure_backtrack_distance, measured_bound,
)
from stsjoin.geometry import Rect, SegmentMotion, cdds
from stsjoin.harness import (
    PipelineConfig, SyntheticSpec, companion_queries, generate_synthetic, oracle_join,
    run_pipeline,
)
from stsjoin.index import IndexConfig, SegmentRef, StsIndex
from stsjoin.join import CandidatePair, QueryParams, server_join, upper_cdds
from stsjoin.metrics import JoinMetrics
from stsjoin.obfuscation import NoiseParams, bounded_laplace_cdf, inverse_cdf, sample_noise
from stsjoin.simplify import simplify_indices

from conftest import dense_positions, random_walk, record

MODES = ("plain", "backtrack", "backtrack+bound")


def rows_match(rows, ref, tol=1e-6):
    if [r[:3] for r in rows] != [r[:3] for r in ref]:
        return False
    return all(abs(a[3] - b[3]) <= tol for a, b in zip(rows, ref))


def test_criterion_1_oracle_equivalence():
    t0 = time.perf_counter()
    spec = SyntheticSpec(num_clients=50, trajs_per_client=10, points_per_traj=51, side=6000,
                         horizon_s=7200, seed=101)
    data = generate_synthetic(spec)
    queries = companion_queries(data, 20, seed=101)
    ref = oracle_join(data, queries, 20, 20)
    ok = {m: rows_match(run_pipeline(data, queries, PipelineConfig(QueryParams(mode=m), seed=1)).rows, ref)
          for m in MODES}
    elapsed = time.perf_counter() - t0
    passed = all(ok.values()) and elapsed < 60 and len(ref) > 0
    record("criterion 1", passed, f"{len(ref)} oracle couples, modes {ok}, {elapsed:.1f} s")
    assert passed


def test_criterion_2_no_false_negative_sweep():
    rng = np.random.default_rng(202)
    spec = SyntheticSpec(num_clients=10, trajs_per_client=10, points_per_traj=41, side=3000,
                         horizon_s=3600, seed=202)
    data = generate_synthetic(spec)
    queries = companion_queries(data, 10, seed=202, offset=20.0, jitter=10.0)
    violations = checked = 0
    for k in range(200):
        p = QueryParams(delta_d=float(rng.uniform(5, 60)), delta_t=float(rng.choice([0, rng.uniform(0, 200)])),
                        theta_sp=float(rng.uniform(0, 40)), theta_ob=float(rng.uniform(0, 40)),
                        mode=MODES[k % 3])
        res = run_pipeline(data, queries, PipelineConfig(p, seed=k))
        batches = server_join(res.index, queries, p)
        have = {(c.data_ref.client_id, c.data_ref.local_traj_id, c.query_traj_id)
                for batch in batches.values() for c in batch}
        for qid, cid, did, _ in oracle_join(data, queries, p.delta_d, p.delta_t):
            checked += 1
            violations += (cid, did, qid) not in have
    passed = violations == 0 and checked > 0
    record("criterion 2", passed, f"{violations} missed of {checked} oracle couples over 200 settings")
    assert passed


def test_criterion_3_bound_soundness():
    rng = np.random.default_rng(303)
    violations = 0
    worst = np.inf
    for i in range(1000):
        theta_sp, theta_ob = rng.uniform(0, 40), rng.uniform(0, 40)
        delta_d = rng.uniform(5, 60)
        orig = random_walk(rng, int(rng.integers(3, 40)), client_id="c", local_id="d", t0=100_000)
        query = random_walk(rng, int(rng.integers(3, 40)), client_id="q", local_id="q",
                            t0=100_000 + int(rng.integers(-60_000, 60_000)),
                            origin=(orig.points[0].x, orig.points[0].y), spread=40)
        kept = simplify_indices(orig.points, theta_sp)
        shown = orig.with_points([orig.points[k] for k in kept])
        noise = sample_noise(NoiseParams(theta_ob), rng, (len(shown.points), 2))
        shown = shown.with_points([p._replace(x=p.x + dx, y=p.y + dy)
                                   for p, (dx, dy) in zip(shown.points, noise)])
        pairs = [CandidatePair(SegmentRef("c", "d", s, shown.segments[s]), "q", j)
                 for s in range(len(shown.segments)) for j in range(len(query.segments))]
        bound = upper_cdds(shown, query, QueryParams(delta_d, 0, theta_sp, theta_ob), pairs)
        exact = cdds(orig, query, delta_d)
        worst = min(worst, bound - exact)
        violations += bound < exact
    record("criterion 3", violations == 0, f"{violations} violations, min slack {worst:.3g} s")
    assert violations == 0


def test_criterion_4_backtracking_benefit():
    per_run = []
    for seed in range(5):
        spec = SyntheticSpec(num_clients=20, trajs_per_client=20, points_per_traj=41, side=20_000,
                             horizon_s=3600, cluster_centers=5, seed=400 + seed)
        data = generate_synthetic(spec)
        queries = companion_queries(data, 20, seed=400 + seed)
        acc = {m: run_pipeline(data, queries, PipelineConfig(QueryParams(mode=m), seed=seed)).metrics.node_accesses
               for m in ("plain", "backtrack")}
        per_run.append((acc["plain"], acc["backtrack"]))
    every = all(bt <= pl for pl, bt in per_run)
    plain = sum(pl for pl, _ in per_run)
    bt = sum(b for _, b in per_run)
    cut = 1 - bt / plain
    passed = every and cut >= 0.05
    record("criterion 4", passed, f"per run (plain, backtrack) {per_run}, aggregate reduction {cut:.1%}")
    assert passed


def test_criterion_5_pruning_benefit():
    spec = SyntheticSpec(num_clients=30, trajs_per_client=10, points_per_traj=51, side=5000,
                         horizon_s=7200, seed=505)
    data = generate_synthetic(spec)
    queries = companion_queries(data, 20, seed=505)
    ref = oracle_join(data, queries, 20, 50)
    runs = {m: run_pipeline(data, queries, PipelineConfig(QueryParams(delta_t=50, mode=m), seed=5))
            for m in ("backtrack", "backtrack+bound")}
    a, b = runs["backtrack"].metrics, runs["backtrack+bound"].metrics
    same = rows_match(runs["backtrack+bound"].rows, ref) and rows_match(runs["backtrack"].rows, ref)
    passed = (b.segment_pairs_sent < a.segment_pairs_sent and b.clients_contacted <= a.clients_contacted
              and same and len(ref) > 0)
    record("criterion 5", passed,
           f"pairs {a.segment_pairs_sent} -> {b.segment_pairs_sent}, clients {a.clients_contacted} -> "
           f"{b.clients_contacted}, oracle match {same}")
    assert passed


def test_criterion_6_simplification_guarantee():
    rng = np.random.default_rng(606)
    worst_excess = -np.inf
    violations = 0
    for i in range(1000):
        tr = random_walk(rng, int(rng.integers(3, 30)), step_ms=(500, 4000), speed=(0.5, 30))
        ts = np.arange(tr.points[0].t, tr.points[-1].t + 1, dtype=float)
        xo, yo = dense_positions(tr, ts)
        for theta in (10, 20, 50):
            kept = simplify_indices(tr.points, theta)
            xs, ys = dense_positions(tr.with_points([tr.points[k] for k in kept]), ts)
            dev = float(np.max(np.hypot(xo - xs, yo - ys)))
            worst_excess = max(worst_excess, dev - theta)
            violations += dev > theta + 1e-9
    record("criterion 6", violations == 0, f"{violations} violations, max(dev - theta) {worst_excess:.3g} m")
    assert violations == 0


def test_criterion_7_obfuscation_distribution():
    p = NoiseParams(20.0)
    x = sample_noise(p, np.random.default_rng(707), 10**6)
    inside = bool(np.all(np.abs(x) <= p.theta_ob))
    ks = stats.kstest(x, lambda v: bounded_laplace_cdf(v, p)).statistic
    grid = np.linspace(0, 1, 10**4)
    trip = float(np.max(np.abs(bounded_laplace_cdf(inverse_cdf(grid, p), p) - grid)))
    passed = inside and ks < 0.005 and trip < 1e-9
    record("criterion 7", passed, f"in support {inside}, KS {ks:.5f}, round trip {trip:.2e}")
    assert passed


def test_criterion_8a_closed_form_vs_summation():
    rng = np.random.default_rng(808)
    worst = 0.0
    bad = 0
    for _ in range(100):
        d = rng.uniform(1e3, 1e5)
        m = rng.uniform(1.0, d / 2)
        n = rng.uniform(1.0, m)
        c = rng.uniform(1.0, d / 8)
        p = CostParams(d, c, m, n)
        closed = expected_backtrack_distance(p)[0]
        summed = expected_backtrack_distance_sum(p)
        rel = abs(closed - summed) / abs(summed)
        worst = max(worst, rel)
        bad += rel > 1e-9
    record("criterion 8a", bad == 0,
           f"closed form vs level sum: {bad}/100 sets beyond 1e-9, worst relative gap {worst:.3g}")
    assert bad == 0


def test_criterion_8b_measured_backtracking_distance():
    spec = SyntheticSpec(num_clients=20, trajs_per_client=25, points_per_traj=41, side=8000,
                         horizon_s=3600, seed=809)
    data = generate_synthetic(spec)
    queries = companion_queries(data, 40, seed=809)
    params = QueryParams(mode="backtrack")
    res = run_pipeline(data, queries, PipelineConfig(params))
    sample = measure_backtrack_distance(res.index, queries, params)
    bound = measured_bound(res.index, sample)
    passed = len(sample.distances) > 0 and sample.mean_distance <= bound
    record("criterion 8b", passed,
           f"mean backtracking distance {sample.mean_distance:.3f} over {len(sample.distances)} pieces, "
           f"bound h - I + 1 = {bound}")
    assert passed


def test_criterion_9_index_integrity():
    rng = np.random.default_rng(909)
    cfg = IndexConfig(Rect(0, 0, 4096, 4096), btree_capacity=4, quad_capacity=4,
                      leaf_interval_s=600, bitmap_interval_s=30)
    idx = StsIndex(cfg)
    pool = {}
    for k in range(800):
        n = int(rng.integers(1, 6))
        x, y = rng.uniform(100, 3996, 2)
        t = int(rng.integers(0, 6 * 3_600_000))
        segs = []
        for i in range(n):
            nx = float(np.clip(x + rng.uniform(-60, 60), 0, 4096))
            ny = float(np.clip(y + rng.uniform(-60, 60), 0, 4096))
            dt = int(rng.integers(1000, 120_000))
            segs.append(SegmentRef(f"c{k % 13}", f"t{k}", i, SegmentMotion(x, y, t, nx, ny, t + dt)))
            x, y, t = nx, ny, t + dt
        pool[(f"c{k % 13}", f"t{k}")] = segs
    names = list(pool)
    live = set()
    ops = 0
    checks_ok = True
    while ops < 10_000:
        name = names[int(rng.integers(len(names)))]
        if name in live:
            idx.delete_trajectory(*name)
            live.discard(name)
        else:
            for ref in pool[name]:
                idx.insert_segment(ref)
            live.add(name)
        ops += 1
        if ops % 2500 == 0:
            try:
                idx.check()
            except AssertionError:
                checks_ok = False
    reference = Counter()
    for name in live:
        for ref in pool[name]:
            reference.update(p.key for p in _pieces(ref, cfg))
    sweep_ok = idx.sweep() == reference
    try:
        idx.check()
    except AssertionError:
        checks_ok = False
    passed = sweep_ok and checks_ok
    record("criterion 9", passed, f"{ops} operations, {len(live)} live trajectories, sweep equal {sweep_ok}, "
                                  f"partition checks {checks_ok}")
    assert passed


def _pieces(ref, cfg):
    from stsjoin.index import split_segment
    return split_segment(ref, cfg.leaf_interval_ms)
