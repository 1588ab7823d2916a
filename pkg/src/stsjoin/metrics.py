"""Run counters shared between index traversals, the join and the clients."""
from __future__ import annotations

import threading
from dataclasses import dataclass, field, fields


class Tally:
    """Private, unlocked access counter for one traversal."""

    __slots__ = ("n",)

    def __init__(self):
        self.n = 0

    def hit(self, k: int = 1):
        self.n += k


@dataclass
class JoinMetrics:
    node_accesses: int = 0
    segment_pairs_sent: int = 0
    clients_contacted: int = 0
    groups_pruned: int = 0
    wall_time_ms: float = 0.0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def bump(self, name: str, k=1):
        if k < 0:
            raise ValueError("counters only grow")
        with self._lock:
            setattr(self, name, getattr(self, name) + k)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self) if not f.name.startswith("_")}

    def to_text(self) -> str:
        lines = []
        for k, v in self.as_dict().items():
            lines.append(f"{k}={v:.3f}" if isinstance(v, float) else f"{k}={v}")
        return "\n".join(lines) + "\n"
