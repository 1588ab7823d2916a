import math

import numpy as np
import pytest

from stsjoin.cost import (
    CostParams, expected_backtrack_distance, expected_backtrack_distance_sum,
    measure_backtrack_distance, measured_bound, total_cost_estimate,
)
from stsjoin.errors import ParameterError
from stsjoin.harness import PipelineConfig, SyntheticSpec, companion_queries, generate_synthetic, run_pipeline
from stsjoin.join import QueryParams


def test_validation():
    with pytest.raises(ParameterError):
        CostParams(100, 1, 60, 10)  # 2m > d
    with pytest.raises(ParameterError):
        CostParams(100, 1, 10, 20)  # n > m
    with pytest.raises(ParameterError):
        CostParams(100, 200, 10, 5)


def test_derived_levels():
    p = CostParams(1024, 1, 64, 32)
    assert (p.h, p.I) == (10, 3)
    assert CostParams(1000, 3, 70, 10).h == 8


def test_half_space_mbr_gives_height():
    p = CostParams(1024, 4, 512, 512)
    e, bound = expected_backtrack_distance(p)
    assert p.I == 0
    assert e == p.h == 8
    assert bound == 9


def test_closed_form_below_bound(rng):
    for _ in range(500):
        d = rng.uniform(100, 1e5)
        m = rng.uniform(1e-3, d / 2)
        n = rng.uniform(1e-3, m)
        c = rng.uniform(1e-3, d)
        e, bound = expected_backtrack_distance(CostParams(d, c, m, n))
        assert e <= bound + 1e-12


def test_sum_matches_closed_form_when_parent_is_root():
    # I = 0: one term; the two agree exactly when d = 2m
    for d, m, n in [(100, 50, 20), (100, 50, 50), (64, 32, 1)]:
        p = CostParams(d, 1, m, n)
        assert expected_backtrack_distance_sum(p) == pytest.approx(expected_backtrack_distance(p)[0], rel=1e-12)


def test_sum_and_closed_form_differ_for_deeper_parents():
    # frozen from exact rational evaluation: at d=1024, c=1, m=n=256 the sum
    # is 86/9 and the closed form 80/9; the gap 2n/(4m-n) at I=1 is 2/3
    p = CostParams(1024, 1, 256, 256)
    assert p.I == 1
    assert expected_backtrack_distance_sum(p) == pytest.approx(86 / 9, rel=1e-12)
    assert expected_backtrack_distance(p)[0] == pytest.approx(80 / 9, rel=1e-12)


def test_total_cost_estimate():
    p = CostParams(1024, 512, 256, 100)
    assert p.h == p.I == 1
    assert total_cost_estimate(p, 50, 20) == 1000
    q = CostParams(1024, 1, 64, 32)
    assert total_cost_estimate(q, 50, 40) == 2 * total_cost_estimate(q, 50, 20)
    assert total_cost_estimate(q, 50, 20) == 4 ** 7 * 1000


def test_measured_distance_within_bound():
    spec = SyntheticSpec(num_clients=10, trajs_per_client=30, points_per_traj=31, side=4000,
                         horizon_s=1800, seed=3)
    data = generate_synthetic(spec)
    qs = companion_queries(data, 30, seed=3)
    params = QueryParams(mode="backtrack")
    res = run_pipeline(data, qs, PipelineConfig(params, quad_capacity=4))
    sample = measure_backtrack_distance(res.index, qs, params)
    assert len(sample.distances) > 100
    assert sample.mean_distance <= measured_bound(res.index, sample)
