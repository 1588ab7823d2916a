"""B+-tree directory over fixed-length time intervals.

Leaf entries map an interval start (ms) to a payload, here the spatial index
of the segments inside ``[start, start + interval)``.
"""
from __future__ import annotations

import bisect
from typing import Any, Callable, Iterator, Optional

from .errors import ParameterError
from .metrics import Tally


class _Node:
    __slots__ = ("keys", "children", "values", "next")

    def __init__(self, leaf: bool):
        self.keys: list[int] = []
        self.children: Optional[list[_Node]] = None if leaf else []
        self.values: Optional[list[Any]] = [] if leaf else None
        self.next: Optional[_Node] = None

    @property
    def is_leaf(self) -> bool:
        return self.children is None


class TemporalTree:
    def __init__(self, interval_ms: int, capacity: int = 100):
        if capacity < 2:
            raise ParameterError("B-tree capacity must be >= 2")
        if interval_ms <= 0:
            raise ParameterError("interval length must be positive")
        self.interval_ms = int(interval_ms)
        self.capacity = capacity
        self.root = _Node(leaf=True)
        self.height = 1

    def __len__(self):
        return sum(1 for _ in self.items())

    def interval_start(self, t: float) -> int:
        return int(t // self.interval_ms) * self.interval_ms

    def _leaf_for(self, key: float, tally: Optional[Tally]) -> tuple[_Node, list[_Node]]:
        node, path = self.root, []
        while True:
            if tally is not None:
                tally.hit()
            if node.is_leaf:
                return node, path
            path.append(node)
            node = node.children[bisect.bisect_right(node.keys, key)]

    def lookup(self, t: float, tally: Optional[Tally] = None) -> Optional[tuple[int, Any]]:
        """Entry ``(start, payload)`` whose interval contains ``t``, else ``None``."""
        leaf, _ = self._leaf_for(t, tally)
        i = bisect.bisect_right(leaf.keys, t) - 1
        if i >= 0 and t < leaf.keys[i] + self.interval_ms:
            return leaf.keys[i], leaf.values[i]
        return None

    def get_or_create(self, start: int, factory: Callable[[int], Any],
                      tally: Optional[Tally] = None) -> Any:
        if start % self.interval_ms:
            raise ParameterError(f"{start} is not aligned to {self.interval_ms} ms")
        leaf, path = self._leaf_for(start, tally)
        i = bisect.bisect_left(leaf.keys, start)
        if i < len(leaf.keys) and leaf.keys[i] == start:
            return leaf.values[i]
        payload = factory(start)
        leaf.keys.insert(i, start)
        leaf.values.insert(i, payload)
        if len(leaf.keys) > self.capacity:
            self._split(leaf, path, tally)
        return payload

    def _split(self, node: _Node, path: list[_Node], tally: Optional[Tally]):
        while len(node.keys) > self.capacity:
            mid = len(node.keys) // 2
            right = _Node(leaf=node.is_leaf)
            if node.is_leaf:
                right.keys, node.keys = node.keys[mid:], node.keys[:mid]
                right.values, node.values = node.values[mid:], node.values[:mid]
                right.next, node.next = node.next, right
                sep = right.keys[0]
            else:
                sep = node.keys[mid]
                right.keys, node.keys = node.keys[mid + 1:], node.keys[:mid]
                right.children, node.children = node.children[mid + 1:], node.children[:mid + 1]
            if tally is not None:
                tally.hit()  # the new sibling is written
            if path:
                parent = path.pop()
                j = bisect.bisect_right(parent.keys, sep)
                parent.keys.insert(j, sep)
                parent.children.insert(j + 1, right)
                node = parent
            else:
                root = _Node(leaf=False)
                root.keys = [sep]
                root.children = [node, right]
                self.root = root
                self.height += 1
                if tally is not None:
                    tally.hit()
                return

    def items(self) -> Iterator[tuple[int, Any]]:
        node = self.root
        while not node.is_leaf:
            node = node.children[0]
        while node is not None:
            yield from zip(node.keys, node.values)
            node = node.next

    def check(self):
        """Assert the structural invariants; used by tests."""
        keys = [k for k, _ in self.items()]
        assert keys == sorted(set(keys))
        assert all(k % self.interval_ms == 0 for k in keys)

        def walk(node, lo, hi, depth):
            assert len(node.keys) <= self.capacity
            assert all((lo is None or k >= lo) and (hi is None or k < hi) for k in node.keys)
            if node.is_leaf:
                return {depth}
            assert len(node.children) == len(node.keys) + 1
            bounds = [lo, *node.keys, hi]
            depths = set()
            for c, a, b in zip(node.children, bounds, bounds[1:]):
                depths |= walk(c, a, b, depth + 1)
            return depths

        depths = walk(self.root, None, None, 1)
        assert depths == {self.height}
