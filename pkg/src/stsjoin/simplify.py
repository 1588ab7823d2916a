"""Time-synchronized Douglas-Peucker simplification.

Classic DP measures the perpendicular distance from a dropped point to the
chord.  Here the chord is a moving position, so a dropped sample ``p_i`` is
compared with the chord interpolated at ``t_i``.  Between samples both the
original and the simplified positions are linear in time, so bounding the
deviation at sample timestamps bounds it everywhere.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import ParameterError
from .geometry import TrajPoint, Trajectory


@dataclass(frozen=True)
class SimplifyParams:
    theta_sp: float

    def __post_init__(self):
        if not (math.isfinite(self.theta_sp) and self.theta_sp >= 0):
            raise ParameterError(f"theta_sp must be finite and >= 0, got {self.theta_sp}")


def _deviation(points: Sequence[TrajPoint], lo: int, hi: int) -> tuple[float, int]:
    """Largest synchronized deviation of ``points[lo+1:hi]`` from chord ``lo -> hi``."""
    a, b = points[lo], points[hi]
    span = b.t - a.t
    worst, at = 0.0, -1
    for i in range(lo + 1, hi):
        p = points[i]
        f = (p.t - a.t) / span
        d = math.hypot(p.x - (a.x + f * (b.x - a.x)), p.y - (a.y + f * (b.y - a.y)))
        if d > worst:
            worst, at = d, i
    return worst, at


def time_sync_deviation(original: Sequence[TrajPoint], candidate_start: TrajPoint,
                        candidate_end: TrajPoint) -> float:
    pts = [candidate_start, *original[1:-1], candidate_end] if len(original) > 2 else []
    if not pts:
        return 0.0
    return _deviation(pts, 0, len(pts) - 1)[0]


def simplify_indices(points: Sequence[TrajPoint], theta_sp: float) -> list[int]:
    """Indices of the points kept by simplification, in order."""
    n = len(points)
    if n <= 2:
        return list(range(n))
    keep = [False] * n
    keep[0] = keep[-1] = True
    stack = [(0, n - 1)]
    while stack:
        lo, hi = stack.pop()
        if hi - lo < 2:
            continue
        worst, at = _deviation(points, lo, hi)
        if worst <= theta_sp:
            continue
        keep[at] = True
        stack.append((at, hi))
        stack.append((lo, at))
    return [i for i, k in enumerate(keep) if k]


def simplify_trajectory(traj: Trajectory, params: SimplifyParams) -> Trajectory:
    kept = simplify_indices(traj.points, params.theta_sp)
    return traj.with_points([traj.points[i] for i in kept])
