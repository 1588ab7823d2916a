"""Analytical backtracking cost of the join on a balanced quadtree.

For a square space of side ``d`` cut into cells of side ``c`` and an expanded
query MBR of ``m`` x ``n`` (``m >= n``), the model gives the expected number
of levels climbed from a leaf to the lowest node covering both pivots.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import ParameterError
from .geometry import Trajectory
from .index import StsIndex, split_to_leaf_intervals
from .join import QueryParams, expand_mbr
from .quadtree import backtrack, find_node


@dataclass(frozen=True)
class CostParams:
    d: float
    c: float
    m: float
    n: float

    def __post_init__(self):
        if not (0 < self.n <= self.m and 2 * self.m <= self.d):
            raise ParameterError(f"need 0 < n <= m and 2m <= d, got {self}")
        if not 0 < self.c <= self.d:
            raise ParameterError(f"need 0 < c <= d, got c={self.c}, d={self.d}")

    @property
    def h(self) -> int:
        return math.floor(math.log2(self.d / self.c))

    @property
    def I(self) -> int:  # noqa: E743  lowest level a common parent can sit at
        return math.floor(math.log2(self.d / (2 * self.m)))


def expected_backtrack_distance(p: CostParams) -> tuple[float, int]:
    """Closed-form expected backtracking distance and its bound ``h - I + 1``."""
    d, m, n = p.d, p.m, p.n
    h, i = p.h, p.I
    e = h - 2 * i + (i + 1) * (d - 2 * m) * (d - 2 * n) / ((d - m) * (d - n))
    return e, h - i + 1


def expected_backtrack_distance_sum(p: CostParams) -> float:
    """The same expectation by direct summation over levels ``0..I``.

    Level ``i`` contributes the probability that the MBR meets a level-``i``
    splitting line, times the ``h - i`` levels climbed.
    """
    d, m, n = p.d, p.m, p.n
    h, top = p.h, p.I
    terms = []
    for i in range(top + 1):
        side = d / 2 ** i
        area = (m * (side - n) + n * (side - m) - m * n) * 4 ** i
        terms.append(area * (h - i))
    return math.fsum(terms) / ((d - m) * (d - n))


def total_cost_estimate(p: CostParams, avg_segments: float, num_queries: int) -> float:
    """Order of magnitude of node accesses for a whole query batch."""
    return 4.0 ** (p.h - p.I) * avg_segments * num_queries


@dataclass
class BacktrackSample:
    distances: list[int]
    widths: list[float]
    heights: list[float]

    @property
    def mean_distance(self) -> float:
        return sum(self.distances) / len(self.distances) if self.distances else 0.0


def measure_backtrack_distance(index: StsIndex, queries: Sequence[Trajectory],
                               params: QueryParams) -> BacktrackSample:
    """Levels climbed from the lower pivot's leaf to the node covering both pivots.

    Only pieces whose expanded MBR fits in half the space are sampled, the
    range the model covers.
    """
    b = index.config.space_bounds
    side = max(b.width, b.height)
    out = BacktrackSample([], [], [])
    for q in queries:
        for piece in split_to_leaf_intervals(q, index.config):
            hit = index.tree_at(piece.motion.t0)
            if hit is None:
                continue
            tree = hit[1]
            exp = expand_mbr(piece.motion, params)
            w, hgt = exp.rect.width, exp.rect.height
            if max(w, hgt) * 2 > side:
                continue
            leaf = find_node(tree.root, *exp.lower_pivot)
            top = backtrack(leaf, *exp.upper_pivot)
            out.distances.append(leaf.depth - top.depth)
            out.widths.append(max(w, hgt))
            out.heights.append(min(w, hgt))
    return out


def model_for_index(index: StsIndex, sample: BacktrackSample) -> CostParams:
    """Model parameters matching a built index: mean leaf side and mean MBR size."""
    b = index.config.space_bounds
    d = max(b.width, b.height)
    sides = [max(leaf.rect.width, leaf.rect.height)
             for _, tree in index.trees() for leaf in tree.leaves()]
    c = sum(sides) / len(sides)
    m = sum(sample.widths) / len(sample.widths)
    n = sum(sample.heights) / len(sample.heights)
    return CostParams(d, c, m, n)


def measured_bound(index: StsIndex, sample: BacktrackSample) -> int:
    """``h - I + 1`` with ``h`` the tallest built quadtree."""
    p = model_for_index(index, sample)
    h = max((tree.height for _, tree in index.trees()), default=0)
    return h - p.I + 1
