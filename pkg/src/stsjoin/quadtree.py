"""Quasi-quadtree over segment endpoints.

Node rectangles tile their parent as four half-open quadrants, so a point is
covered by exactly one node per level.  Capacity counts endpoints; a leaf
additionally stores every segment whose tight MBR overlaps the leaf's
rectangle, with one bitmap row per segment marking the time slots it spans.
"""
from __future__ import annotations

import math
from collections import Counter, deque
from typing import TYPE_CHECKING, Hashable, Iterator, Optional

from .geometry import Rect
from .metrics import Tally

if TYPE_CHECKING:
    from .index import SegmentRef

MAX_DEPTH = 20

SW, SE, NW, NE = range(4)


class QuadNode:
    __slots__ = ("rect", "parent", "children", "depth", "closed_x", "closed_y",
                 "endpoints", "segs", "bits")

    def __init__(self, rect: Rect, parent=None, depth=0, closed_x=True, closed_y=True):
        self.rect = rect
        self.parent: Optional[QuadNode] = parent
        self.children: Optional[list[QuadNode]] = None
        self.depth = depth
        # the upper edge is closed only where it lies on the space boundary
        self.closed_x = closed_x
        self.closed_y = closed_y
        self.endpoints: list[tuple[float, float, Hashable]] = []
        self.segs: dict[Hashable, "SegmentRef"] = {}
        self.bits: dict[Hashable, int] = {}

    def __repr__(self):
        kind = "leaf" if self.is_leaf else "inner"
        return f"QuadNode({kind}, depth={self.depth}, rect={tuple(self.rect)})"

    @property
    def is_leaf(self) -> bool:
        return self.children is None

    def contains(self, x: float, y: float) -> bool:
        r = self.rect
        in_x = r.x0 <= x < r.x1 or (self.closed_x and x == r.x1)
        in_y = r.y0 <= y < r.y1 or (self.closed_y and y == r.y1)
        return in_x and in_y

    def quadrant(self, x: float, y: float) -> int:
        r = self.rect
        return (x >= 0.5 * (r.x0 + r.x1)) + 2 * (y >= 0.5 * (r.y0 + r.y1))


def find_node(root: QuadNode, x: float, y: float, tally: Optional[Tally] = None) -> QuadNode:
    """Leaf covering ``(x, y)``; points outside the root are clamped onto it."""
    x, y = root.rect.clamp(x, y)
    node = root
    while True:
        if tally is not None:
            tally.hit()
        if node.is_leaf:
            return node
        node = node.children[node.quadrant(x, y)]


def backtrack(node: QuadNode, x: float, y: float, tally: Optional[Tally] = None) -> QuadNode:
    """Lowest ancestor of ``node`` (inclusive) covering ``(x, y)``.

    The starting node is already in hand and is not counted; every parent
    moved to is one access.
    """
    root = node
    while root.parent is not None:
        root = root.parent
    x, y = root.rect.clamp(x, y)
    while not node.contains(x, y) and node.parent is not None:
        node = node.parent
        if tally is not None:
            tally.hit()
    return node


def slot_mask(t_start: float, t_end: float, origin: int, slot_ms: int, n_slots: int) -> int:
    """Bitmask of slots ``[origin + k*slot_ms, origin + (k+1)*slot_ms)`` met by the span.

    Overlap means positive length; a span that only touches a slot edge does
    not set that slot.
    """
    if t_end < t_start:
        return 0
    k0 = int((t_start - origin) // slot_ms)
    k1 = int(math.ceil((t_end - origin) / slot_ms)) - 1
    if t_end == t_start:
        k1 = k0
    k0 = max(k0, 0)
    k1 = min(k1, n_slots - 1)
    if k1 < k0:
        return 0
    return ((1 << (k1 + 1)) - 1) ^ ((1 << k0) - 1)


def leaf_candidates(leaf: QuadNode, query_rect: Rect, query_mask: int) -> list["SegmentRef"]:
    """Segments of ``leaf`` sharing a bitmap slot with the query and overlapping its rectangle."""
    out = []
    bits = leaf.bits
    for key, ref in leaf.segs.items():
        if bits[key] & query_mask and ref.mbr.overlaps(query_rect):
            out.append(ref)
    return out


class QuasiQuadtree:
    """Spatial index for the segments of one leaf time interval."""

    def __init__(self, bounds: Rect, capacity: int, origin_ms: int, slot_ms: int, n_slots: int,
                 max_depth: int = MAX_DEPTH):
        self.root = QuadNode(bounds)
        self.capacity = capacity
        self.origin_ms = origin_ms
        self.slot_ms = slot_ms
        self.n_slots = n_slots
        self.max_depth = max_depth

    def __len__(self):
        return len(self.keys())

    # ----------------------------------------------------------- reading

    def iter_nodes(self) -> Iterator[QuadNode]:
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            if not node.is_leaf:
                stack.extend(reversed(node.children))

    def leaves(self) -> Iterator[QuadNode]:
        return (n for n in self.iter_nodes() if n.is_leaf)

    def keys(self) -> set:
        return {k for leaf in self.leaves() for k in leaf.segs}

    @property
    def height(self) -> int:
        return max(n.depth for n in self.iter_nodes())

    @property
    def is_empty(self) -> bool:
        return self.root.is_leaf and not self.root.segs and not self.root.endpoints

    def mask(self, t_start: float, t_end: float) -> int:
        return slot_mask(t_start, t_end, self.origin_ms, self.slot_ms, self.n_slots)

    def nodes_overlapping(self, rect: Rect, start: Optional[QuadNode] = None,
                          tally: Optional[Tally] = None, count_start: bool = True) -> list[QuadNode]:
        """Leaves reachable from ``start`` by breadth-first search through overlapping nodes."""
        start = start or self.root
        queue = deque([start])
        leaves = []
        first = True
        while queue:
            node = queue.popleft()
            if tally is not None and (count_start or not first):
                tally.hit()
            first = False
            if node.is_leaf:
                leaves.append(node)
                continue
            for child in node.children:
                if child.rect.overlaps(rect):
                    queue.append(child)
        return leaves

    # ----------------------------------------------------------- writing

    def insert(self, ref: "SegmentRef", tally: Optional[Tally] = None):
        m = ref.motion
        for x, y in ((m.x0, m.y0), (m.x1, m.y1)):
            leaf = find_node(self.root, x, y, tally)
            leaf.endpoints.append((x, y, ref.key))
            if len(leaf.endpoints) > self.capacity:
                self._split(leaf, tally)
        bits = self.mask(m.t0, m.t1)
        for leaf in self.nodes_overlapping(ref.mbr, tally=tally):
            leaf.segs[ref.key] = ref
            leaf.bits[ref.key] = bits

    def _split(self, leaf: QuadNode, tally: Optional[Tally]):
        stack = [leaf]
        while stack:
            node = stack.pop()
            if len(node.endpoints) <= self.capacity or node.depth >= self.max_depth:
                continue
            r = node.rect
            mx, my = 0.5 * (r.x0 + r.x1), 0.5 * (r.y0 + r.y1)
            d = node.depth + 1
            node.children = [
                QuadNode(Rect(r.x0, r.y0, mx, my), node, d, False, False),
                QuadNode(Rect(mx, r.y0, r.x1, my), node, d, node.closed_x, False),
                QuadNode(Rect(r.x0, my, mx, r.y1), node, d, False, node.closed_y),
                QuadNode(Rect(mx, my, r.x1, r.y1), node, d, node.closed_x, node.closed_y),
            ]
            if tally is not None:
                tally.hit(4)
            for e in node.endpoints:
                node.children[node.quadrant(e[0], e[1])].endpoints.append(e)
            for key, ref in node.segs.items():
                mbr = ref.mbr
                for child in node.children:
                    if child.rect.overlaps(mbr):
                        child.segs[key] = ref
                        child.bits[key] = node.bits[key]
            node.endpoints, node.segs, node.bits = [], {}, {}
            stack.extend(node.children)

    def remove(self, ref: "SegmentRef", tally: Optional[Tally] = None) -> bool:
        """Drop one segment and its endpoints, then merge under-full sibling groups."""
        key = ref.key
        touched = []
        found = False
        for leaf in self.nodes_overlapping(ref.mbr, tally=tally):
            if leaf.segs.pop(key, None) is not None:
                found = True
                del leaf.bits[key]
                touched.append(leaf)
        m = ref.motion
        for x, y in ((m.x0, m.y0), (m.x1, m.y1)):
            leaf = find_node(self.root, x, y, tally)
            for i, e in enumerate(leaf.endpoints):
                if e[2] == key:
                    del leaf.endpoints[i]
                    found = True
                    break
            touched.append(leaf)
        for leaf in touched:
            self._condense(leaf.parent, tally)
        return found

    def _condense(self, node: Optional[QuadNode], tally: Optional[Tally]):
        while node is not None and node.children is not None:
            kids = node.children
            if any(not c.is_leaf for c in kids):
                return
            if sum(len(c.endpoints) for c in kids) > self.capacity:
                return
            for c in kids:
                node.endpoints.extend(c.endpoints)
                node.segs.update(c.segs)
                node.bits.update(c.bits)
            node.children = None
            if tally is not None:
                tally.hit()
            node = node.parent

    # ----------------------------------------------------------- checking

    def check(self):
        """Assert the partition, capacity and placement invariants; used by tests."""
        for node in self.iter_nodes():
            if node.is_leaf:
                assert len(node.endpoints) <= self.capacity or node.depth >= self.max_depth
                assert set(node.segs) == set(node.bits)
                for x, y, _ in node.endpoints:
                    assert node.contains(x, y)
                for key, ref in node.segs.items():
                    assert ref.mbr.overlaps(node.rect)
                    assert node.bits[key] == self.mask(ref.motion.t0, ref.motion.t1)
                continue
            assert not node.endpoints and not node.segs
            r = node.rect
            mx, my = 0.5 * (r.x0 + r.x1), 0.5 * (r.y0 + r.y1)
            expect = [Rect(r.x0, r.y0, mx, my), Rect(mx, r.y0, r.x1, my),
                      Rect(r.x0, my, mx, r.y1), Rect(mx, my, r.x1, r.y1)]
            assert [c.rect for c in node.children] == expect
            assert all(c.parent is node and c.depth == node.depth + 1 for c in node.children)
            # quadrants share only edges, and only one of them owns each edge
            assert [(c.closed_x, c.closed_y) for c in node.children] == [
                (False, False), (node.closed_x, False), (False, node.closed_y),
                (node.closed_x, node.closed_y)]

    def stats(self) -> dict:
        per_level = Counter(n.depth for n in self.iter_nodes())
        occupancy = Counter(len(n.segs) for n in self.leaves())
        return {"nodes_per_level": dict(sorted(per_level.items())), "height": self.height,
                "leaf_occupancy": dict(sorted(occupancy.items()))}
