"""How far does backtracking climb?

Measures the number of quadtree levels climbed per query segment on uniform
data and puts it next to the analytical model.  The model has a closed form
and a level-by-level sum; they agree only when the common parent is the root.
"""
import numpy as np

from stsjoin.cost import (
    CostParams, expected_backtrack_distance, expected_backtrack_distance_sum,
    measure_backtrack_distance, measured_bound, model_for_index,
)
from stsjoin.harness import PipelineConfig, SyntheticSpec, companion_queries, generate_synthetic, run_pipeline
from stsjoin.join import QueryParams

spec = SyntheticSpec(num_clients=20, trajs_per_client=25, points_per_traj=41, side=8000,
                     horizon_s=3600, seed=3)
data = generate_synthetic(spec)
queries = companion_queries(data, 40, seed=3)
params = QueryParams(mode="backtrack")
res = run_pipeline(data, queries, PipelineConfig(params))

sample = measure_backtrack_distance(res.index, queries, params)
print("levels climbed:", np.bincount(sample.distances))
print(f"mean {sample.mean_distance:.3f}, bound h - I + 1 = {measured_bound(res.index, sample)}")

p = model_for_index(res.index, sample)
print(f"model inputs d={p.d:.0f} c={p.c:.1f} m={p.m:.1f} n={p.n:.1f} -> h={p.h}, I={p.I}")
closed, bound = expected_backtrack_distance(p)
print(f"closed form {closed:.3f}, level sum {expected_backtrack_distance_sum(p):.3f}, bound {bound}")

print()
print("closed form vs level sum as the query box shrinks (d=1024, c=1):")
for m in (512, 256, 128, 64, 32):
    q = CostParams(1024, 1, m, m)
    print(f"  m=n={m:>3} I={q.I}: {expected_backtrack_distance(q)[0]:7.3f} {expected_backtrack_distance_sum(q):7.3f}")
