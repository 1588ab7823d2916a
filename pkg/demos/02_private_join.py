"""End to end: clients publish blurred trajectories, the server joins.

Each client keeps its raw trajectories.  The server only sees simplified,
noise-shifted copies and returns candidate segment pairs; the clients check
them against the raw data.  The result must equal a brute-force join on raw
data.
"""
from stsjoin.harness import (
    PipelineConfig, SyntheticSpec, companion_queries, generate_synthetic, oracle_join,
    prepare_data, run_pipeline,
)
from stsjoin.join import QueryParams, join_report

spec = SyntheticSpec(num_clients=20, trajs_per_client=15, points_per_traj=61, side=6000,
                     horizon_s=3600, seed=7)
data = generate_synthetic(spec)
queries = companion_queries(data, 15, seed=7)
print(f"{len(data)} data trajectories, {len(queries)} queries")

# what the server is given
published = prepare_data(data, PipelineConfig())
kept = sum(len(tr.points) for tr, _ in published)
print(f"points published: {kept} of {sum(len(t.points) for t in data)}")
raw, shown = data[0].points[0], published[0][0].points[0]
print(f"first point moved by ({shown.x - raw.x:+.1f}, {shown.y - raw.y:+.1f}) m")

truth = oracle_join(data, queries, 20, 20)
runs = {}
for mode in ("plain", "backtrack", "backtrack+bound"):
    res = run_pipeline(data, queries, PipelineConfig(QueryParams(mode=mode)))
    same = [r[:3] for r in res.rows] == [r[:3] for r in truth]
    print(f"{mode:>16}: {len(res.rows)} couples, equal to brute force: {same}")
    runs[mode] = res.metrics

print()
print(join_report(runs))
for q, c, d, s in truth[:5]:
    print(f"{q} met {c}/{d} for {s:.1f} s")
