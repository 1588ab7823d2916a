"""Server-side join: candidate segment pairs for every query trajectory.

Each query segment's MBR is grown so that no data segment whose original
could come within ``delta_d`` is missed, even after simplification and
obfuscation.  The quadtree is searched breadth-first from a start node; in
backtracking mode the start node is found by climbing from the leaf left by
the previous query segment instead of descending from the root.
"""
from __future__ import annotations

import logging
import math
import time
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Hashable, Iterable, Mapping, Optional, Sequence

from .errors import ParameterError
from .geometry import Rect, SegmentMotion, Trajectory, cdd
from .index import SegmentRef, StsIndex, split_to_leaf_intervals
from .metrics import JoinMetrics, Tally
from .quadtree import backtrack, find_node, leaf_candidates

log = logging.getLogger(__name__)

MODES = ("plain", "backtrack", "backtrack+bound")

# pruning keeps a group whose bound falls short of delta_t by less than this
# (relative); the bound and the exact sum are computed on different segment
# sets and may round differently when they coincide
BOUND_SLACK = 1e-9


@dataclass(frozen=True)
class QueryParams:
    delta_d: float = 20.0
    delta_t: float = 20.0
    theta_sp: float = 20.0
    theta_ob: float = 20.0
    mode: str = "backtrack+bound"

    def __post_init__(self):
        if not self.delta_d > 0:
            raise ParameterError(f"delta_d must be positive, got {self.delta_d}")
        if not self.delta_t >= 0:
            raise ParameterError(f"delta_t must be >= 0, got {self.delta_t}")
        if not (self.theta_sp >= 0 and self.theta_ob >= 0):
            raise ParameterError("thresholds must be >= 0")
        if self.mode == "backtrack-bound":
            object.__setattr__(self, "mode", "backtrack+bound")
        if self.mode not in MODES:
            raise ParameterError(f"unknown mode {self.mode!r}; expected one of {MODES}")

    @property
    def expansion(self) -> float:
        return self.delta_d + self.theta_sp + self.theta_ob

    @property
    def bound_threshold(self) -> float:
        return self.delta_d + self.theta_sp + math.sqrt(2.0) * self.theta_ob

    def passes(self, total_s: float) -> bool:
        """Time-threshold test; a zero threshold asks for any close contact at all."""
        if self.delta_t == 0:
            return total_s > 0
        return total_s >= self.delta_t


@dataclass(frozen=True)
class ExpandedMbr:
    rect: Rect
    lower_pivot: tuple[float, float]
    upper_pivot: tuple[float, float]


def expand_mbr(seg: SegmentMotion, params: QueryParams) -> ExpandedMbr:
    """Grow the segment MBR by the expansion on every side and pick its pivots.

    The lower pivot is the corner nearest the start point and the upper pivot
    the corner nearest the end point.  On an axis where the two endpoints
    coincide the lower pivot takes the low side and the upper pivot the high
    side, so the pivots are always diagonally opposite.
    """
    rect = seg.mbr.expand(params.expansion)
    lx = rect.x0 if seg.x0 <= seg.x1 else rect.x1
    ly = rect.y0 if seg.y0 <= seg.y1 else rect.y1
    ux = rect.x1 if seg.x0 <= seg.x1 else rect.x0
    uy = rect.y1 if seg.y0 <= seg.y1 else rect.y0
    return ExpandedMbr(rect, (lx, ly), (ux, uy))


@dataclass(frozen=True)
class CandidatePair:
    data_ref: SegmentRef
    query_traj_id: Hashable
    query_segment_index: int

    @property
    def key(self) -> tuple:
        return (self.data_ref.key, self.query_traj_id, self.query_segment_index)

    @property
    def group(self) -> tuple:
        r = self.data_ref
        return (r.client_id, r.local_traj_id, self.query_traj_id)


def _search(index: StsIndex, query: Trajectory, params: QueryParams,
            tally: Tally) -> dict[tuple, CandidatePair]:
    pieces = split_to_leaf_intervals(query, index.config)
    walk = params.mode != "plain"
    found: dict[tuple, CandidatePair] = {}
    cur_start = None
    tree = None
    start_leaf = None
    missing = 0
    for i, piece in enumerate(pieces):
        m = piece.motion
        begin = index.temporal.interval_start(m.t0)
        if not walk or begin != cur_start:
            hit = index.tree_at(m.t0, tally)
            cur_start = begin
            tree = None if hit is None else hit[1]
            start_leaf = None
        if tree is None:
            missing += 1
            continue
        exp = expand_mbr(m, params)
        if walk:
            if start_leaf is None:
                start_leaf = find_node(tree.root, *exp.lower_pivot, tally)
            top = backtrack(start_leaf, *exp.upper_pivot, tally)
            leaves = tree.nodes_overlapping(exp.rect, top, tally, count_start=False)
        else:
            leaves = tree.nodes_overlapping(exp.rect, tally=tally)

        mask = tree.mask(m.t0, m.t1)
        for leaf in leaves:
            for ref in leaf_candidates(leaf, exp.rect, mask):
                pair = CandidatePair(index.refs[ref.key], query.local_id, piece.segment_index)
                found.setdefault(pair.key, pair)

        if walk:
            # remember the leaf under the next piece's lower pivot; the
            # shared endpoint puts it inside this rect, so a visited leaf
            # normally covers it
            start_leaf = None
            if i + 1 < len(pieces):
                nxt = pieces[i + 1].motion
                if index.temporal.interval_start(nxt.t0) == cur_start:
                    px, py = tree.root.rect.clamp(*expand_mbr(nxt, params).lower_pivot)
                    start_leaf = next((lf for lf in leaves if lf.contains(px, py)), None)
    if missing:
        log.info("query %s: %d of %d pieces fall outside the indexed time range",
                 query.local_id, missing, len(pieces))
    return found


def upper_cdds(data_simplified_obf: Optional[Trajectory], query: Trajectory,
               params: QueryParams, pairs: Iterable[CandidatePair]) -> float:
    """Upper bound on the exact CDDS of one couple, in seconds.

    CDDs are taken at the inflated threshold on the simplified and obfuscated
    data segments.  When ``data_simplified_obf`` is ``None`` the motions carried
    by the segment references are used.
    """
    thr = params.bound_threshold
    q = query.segments
    parts = []
    for p in pairs:
        if data_simplified_obf is None:
            s = p.data_ref.motion
        else:
            s = data_simplified_obf.segments[p.data_ref.segment_index]
        parts.append(cdd(s, q[p.query_segment_index], thr))
    return math.fsum(parts)


def prune_by_bound(grouped: Mapping[tuple, list[CandidatePair]], params: QueryParams,
                   queries: Mapping[Hashable, Trajectory]) -> tuple[dict, int]:
    """Drop groups whose CDDS upper bound cannot reach ``delta_t``.

    Returns the surviving groups and the number removed.
    """
    if params.delta_t == 0:
        return dict(grouped), 0
    keep = {}
    limit = params.delta_t * (1.0 - BOUND_SLACK)
    for key, pairs in grouped.items():
        bound = upper_cdds(None, queries[key[2]], params, pairs)
        if bound >= limit:
            keep[key] = pairs
    return keep, len(grouped) - len(keep)


def server_join(index: StsIndex, queries: Sequence[Trajectory], params: QueryParams,
                metrics: Optional[JoinMetrics] = None,
                workers: int = 1) -> dict[Hashable, list[CandidatePair]]:
    """Candidate pairs for every query, grouped by the client owning the data."""
    metrics = metrics if metrics is not None else JoinMetrics()
    by_id = {}
    for q in queries:
        if q.local_id in by_id:
            raise ParameterError(f"duplicate query trajectory id {q.local_id!r}")
        by_id[q.local_id] = q
    t0 = time.perf_counter()

    def one(q):
        tally = Tally()
        found = _search(index, q, params, tally)
        metrics.bump("node_accesses", tally.n)
        return found

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(one, queries))
    else:
        parts = [one(q) for q in queries]

    grouped: dict[tuple, list[CandidatePair]] = defaultdict(list)
    for found in parts:
        for key in sorted(found, key=_sort_key):
            pair = found[key]
            grouped[pair.group].append(pair)
    if params.mode == "backtrack+bound":
        grouped, n_pruned = prune_by_bound(grouped, params, by_id)
        metrics.bump("groups_pruned", n_pruned)

    out: dict[Hashable, list[CandidatePair]] = defaultdict(list)
    for key in sorted(grouped, key=_sort_key):
        out[key[0]].extend(grouped[key])
    metrics.bump("segment_pairs_sent", sum(len(v) for v in out.values()))
    metrics.bump("clients_contacted", len(out))
    metrics.bump("wall_time_ms", (time.perf_counter() - t0) * 1000.0)
    return dict(out)


def _sort_key(key):
    return tuple(map(str, _flatten(key)))


def _flatten(key):
    for k in key:
        if isinstance(k, tuple):
            yield from _flatten(k)
        else:
            yield k


def join_report(runs: Mapping[str, JoinMetrics]) -> str:
    """Plain-text table of per-mode counters."""
    head = f"{'mode':<16}{'node_accesses':>15}{'pairs_sent':>12}{'pruned':>8}{'clients':>9}"
    lines = [head]
    for mode, m in runs.items():
        lines.append(f"{mode:<16}{m.node_accesses:>15}{m.segment_pairs_sent:>12}"
                     f"{m.groups_pruned:>8}{m.clients_contacted:>9}")
    return "\n".join(lines) + "\n"
