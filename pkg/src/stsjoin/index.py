"""Server-side spatio-temporal index.

A temporal B+-tree splits time into fixed leaf intervals; each interval owns a
quasi-quadtree holding the (simplified, obfuscated) segments that fall into
it.  Segments crossing an interval boundary are cut at the boundary, and the
pieces remember the segment they came from.
"""
from __future__ import annotations

import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Optional, Sequence

from .errors import IngestionError, ParameterError
from .geometry import Rect, SegmentMotion, Trajectory
from .metrics import Tally
from .quadtree import MAX_DEPTH, QuasiQuadtree
from .temporal import TemporalTree

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class IndexConfig:
    space_bounds: Rect
    btree_capacity: int = 100
    quad_capacity: int = 4
    leaf_interval_s: float = 1800
    bitmap_interval_s: float = 30
    max_depth: int = MAX_DEPTH

    def __post_init__(self):
        object.__setattr__(self, "space_bounds", Rect(*self.space_bounds))
        if self.btree_capacity < 2 or self.quad_capacity < 2:
            raise ParameterError("node capacities must be >= 2")
        leaf, slot = self.leaf_interval_ms, self.bitmap_interval_ms
        if slot <= 0 or leaf <= 0 or leaf % slot:
            raise ParameterError("leaf interval must be a positive multiple of the bitmap interval")
        b = self.space_bounds
        if not (b.x0 < b.x1 and b.y0 < b.y1):
            raise ParameterError(f"empty space bounds {tuple(b)}")

    @property
    def leaf_interval_ms(self) -> int:
        return int(round(self.leaf_interval_s * 1000))

    @property
    def bitmap_interval_ms(self) -> int:
        return int(round(self.bitmap_interval_s * 1000))

    @property
    def n_slots(self) -> int:
        return self.leaf_interval_ms // self.bitmap_interval_ms


@dataclass(frozen=True)
class SegmentRef:
    """A trajectory segment as the server sees it.

    ``segment_index`` numbers segments of the (simplified) trajectory the
    segment belongs to; ``source_range`` is the half-open range of original
    segment indices it replaces.  ``piece`` counts cuts at interval
    boundaries, 0 for the first piece.
    """

    client_id: Hashable
    local_traj_id: Hashable
    segment_index: int
    motion: SegmentMotion
    source_range: tuple[int, int] = None
    piece: int = 0
    mbr: Rect = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.source_range is None:
            object.__setattr__(self, "source_range", (self.segment_index, self.segment_index + 1))
        object.__setattr__(self, "mbr", self.motion.mbr)

    @property
    def key(self) -> tuple:
        return (self.client_id, self.local_traj_id, self.segment_index)

    @property
    def traj_key(self) -> tuple:
        return (self.client_id, self.local_traj_id)


def split_segment(ref: SegmentRef, leaf_interval_ms: int) -> list[SegmentRef]:
    """Cut ``ref`` at every interval boundary strictly inside its span."""
    m = ref.motion
    first = (m.t0 // leaf_interval_ms + 1) * leaf_interval_ms
    cuts = list(range(first, m.t1, leaf_interval_ms))
    if not cuts:
        return [ref]
    bounds = [m.t0, *cuts, m.t1]
    return [SegmentRef(ref.client_id, ref.local_traj_id, ref.segment_index,
                       m.sub_motion(a, b), ref.source_range, k)
            for k, (a, b) in enumerate(zip(bounds, bounds[1:]))]


def trajectory_refs(traj: Trajectory,
                    source_ranges: Optional[Sequence[tuple[int, int]]] = None) -> list[SegmentRef]:
    segs = traj.segments
    if source_ranges is None:
        source_ranges = [(i, i + 1) for i in range(len(segs))]
    return [SegmentRef(traj.client_id, traj.local_id, i, s, tuple(source_ranges[i]))
            for i, s in enumerate(segs)]


def split_to_leaf_intervals(traj: Trajectory, config: IndexConfig,
                            source_ranges: Optional[Sequence[tuple[int, int]]] = None) -> list[SegmentRef]:
    out = []
    for ref in trajectory_refs(traj, source_ranges):
        out.extend(split_segment(ref, config.leaf_interval_ms))
    return out


class StsIndex:
    def __init__(self, config: IndexConfig):
        self.config = config
        self.temporal = TemporalTree(config.leaf_interval_ms, config.btree_capacity)
        self.refs: dict[tuple, SegmentRef] = {}
        self._by_traj: dict[tuple, list[tuple]] = defaultdict(list)
        # accesses made by construction and updates; queries count privately
        self.build_accesses = Tally()

    def __len__(self):
        return len(self.refs)

    def _new_tree(self, start: int) -> QuasiQuadtree:
        c = self.config
        return QuasiQuadtree(c.space_bounds, c.quad_capacity, start, c.bitmap_interval_ms,
                             c.n_slots, c.max_depth)

    def tree_at(self, t: float, tally: Optional[Tally] = None) -> Optional[tuple[int, QuasiQuadtree]]:
        return self.temporal.lookup(t, tally)

    def trees(self):
        return self.temporal.items()

    def insert_segment(self, ref: SegmentRef):
        if ref.key in self.refs:
            raise IngestionError(f"segment {ref.key} already indexed")
        b = self.config.space_bounds
        m = ref.motion
        for x, y in ((m.x0, m.y0), (m.x1, m.y1)):
            if not b.contains_closed(x, y):
                raise IngestionError(f"segment {ref.key}: endpoint ({x}, {y}) outside space bounds {tuple(b)}")
        if m.t0 < 0:
            raise IngestionError(f"segment {ref.key}: negative timestamp {m.t0}")
        tally = self.build_accesses
        for piece in split_segment(ref, self.config.leaf_interval_ms):
            start = self.temporal.interval_start(piece.motion.t0)
            tree = self.temporal.get_or_create(start, self._new_tree, tally)
            tree.insert(piece, tally)
        self.refs[ref.key] = ref
        self._by_traj[ref.traj_key].append(ref.key)

    def insert_trajectory(self, traj: Trajectory,
                          source_ranges: Optional[Sequence[tuple[int, int]]] = None):
        for ref in trajectory_refs(traj, source_ranges):
            self.insert_segment(ref)

    def delete_trajectory(self, client_id: Hashable, local_traj_id: Hashable) -> bool:
        """Remove every segment of a trajectory; ``False`` if it was not indexed."""
        keys = self._by_traj.pop((client_id, local_traj_id), None)
        if not keys:
            log.info("delete of unknown trajectory %s/%s", client_id, local_traj_id)
            return False
        tally = self.build_accesses
        for key in keys:
            ref = self.refs.pop(key)
            for piece in split_segment(ref, self.config.leaf_interval_ms):
                hit = self.temporal.lookup(piece.motion.t0, tally)
                hit[1].remove(piece, tally)
        return True

    # ----------------------------------------------------------- inspection

    def sweep(self) -> Counter:
        """Multiset of segment keys over all leaves, one count per (interval, key)."""
        out = Counter()
        for _, tree in self.trees():
            out.update(tree.keys())
        return out

    def stored_keys(self) -> set:
        return {k for _, tree in self.trees() for k in tree.keys()}

    def check(self):
        self.temporal.check()
        expect = Counter()
        for ref in self.refs.values():
            for piece in split_segment(ref, self.config.leaf_interval_ms):
                expect[piece.key] += 1
        assert self.sweep() == expect
        for start, tree in self.trees():
            tree.check()
            leaves = list(tree.leaves())
            for key in tree.keys():
                ref = self.refs[key]
                piece = next(p for p in split_segment(ref, self.config.leaf_interval_ms)
                             if self.temporal.interval_start(p.motion.t0) == start)
                holding = {id(l) for l in leaves if key in l.segs}
                overlapping = {id(l) for l in leaves if l.rect.overlaps(piece.mbr)}
                assert holding == overlapping, key

    def stats(self) -> dict:
        levels = Counter()
        occupancy = Counter()
        height = 0
        n_trees = 0
        for _, tree in self.trees():
            n_trees += 1
            s = tree.stats()
            levels.update(s["nodes_per_level"])
            occupancy.update(s["leaf_occupancy"])
            height = max(height, s["height"])
        return {"segments": len(self.refs), "intervals": n_trees,
                "btree_height": self.temporal.height, "quadtree_height": height,
                "nodes_per_level": dict(sorted(levels.items())),
                "leaf_occupancy": dict(sorted(occupancy.items()))}

    def stats_text(self) -> str:
        s = self.stats()
        lines = [f"segments={s['segments']}", f"intervals={s['intervals']}",
                 f"btree_height={s['btree_height']}", f"height={s['quadtree_height']}"]
        lines += [f"level{lvl}_nodes={n}" for lvl, n in s["nodes_per_level"].items()]
        buckets = Counter()
        for k, n in s["leaf_occupancy"].items():
            lo = 0 if k == 0 else 1 << (k.bit_length() - 1)
            buckets[lo] += n
        for lo, n in sorted(buckets.items()):
            hi = max(lo, 2 * lo - 1)
            label = str(lo) if hi == lo else f"{lo}-{hi}"
            lines.append(f"leaves_with_{label}_segments={n}")
        return "\n".join(lines) + "\n"


def build_index(segments: Iterable[SegmentRef], config: IndexConfig) -> StsIndex:
    index = StsIndex(config)
    for ref in segments:
        index.insert_segment(ref)
    return index


def insert_segment(index: StsIndex, seg: SegmentRef) -> StsIndex:
    index.insert_segment(seg)
    return index


def delete_trajectory(index: StsIndex, client_id: Hashable, local_traj_id: Hashable) -> bool:
    return index.delete_trajectory(client_id, local_traj_id)
