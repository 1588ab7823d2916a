"""Continuous-time trajectory geometry.

Positions between samples follow constant-speed linear interpolation.  The
close-distance duration (CDD) of two time-overlapping segments is the length
of the time window in which they are within ``delta_d`` metres of each other;
summing CDDs over all overlapping segment pairs of two trajectories gives the
close-distance duration similarity (CDDS).

Timestamps are integer milliseconds.  Velocities and CDD durations are in
seconds.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Hashable, Iterator, NamedTuple, Optional, Sequence

from .errors import DegenerateSegmentError, OutOfRangeError, ParameterError

MS_PER_S = 1000.0


class TrajPoint(NamedTuple):
    x: float
    y: float
    t: int


class TimeInterval(NamedTuple):
    """Closed time interval in milliseconds."""

    start: float
    end: float

    @property
    def duration(self) -> float:
        return self.end - self.start

    @property
    def duration_s(self) -> float:
        return (self.end - self.start) / MS_PER_S


class Rect(NamedTuple):
    """Axis-aligned rectangle ``[x0, x1] x [y0, y1]``."""

    x0: float
    y0: float
    x1: float
    y1: float

    def overlaps(self, other: "Rect") -> bool:
        # closed on both sides so touching rectangles count as overlapping
        return (self.x0 <= other.x1 and other.x0 <= self.x1
                and self.y0 <= other.y1 and other.y0 <= self.y1)

    def contains_closed(self, x: float, y: float) -> bool:
        return self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1

    def expand(self, e: float) -> "Rect":
        return Rect(self.x0 - e, self.y0 - e, self.x1 + e, self.y1 + e)

    def clamp(self, x: float, y: float) -> tuple[float, float]:
        return (min(max(x, self.x0), self.x1), min(max(y, self.y0), self.y1))

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0


@dataclass(frozen=True)
class SegmentMotion:
    """Constant-velocity motion between two timestamped points.

    ``k_x, k_y`` are velocities in m/s and ``b_x, b_y`` the intercepts so that
    ``x(t) = k_x * t + b_x`` with ``t`` in seconds.  Positions are evaluated
    from the stored endpoints rather than the intercepts, which lose precision
    for large epoch timestamps.
    """

    x0: float
    y0: float
    t0: int
    x1: float
    y1: float
    t1: int

    def __post_init__(self):
        if not self.t0 < self.t1:
            raise DegenerateSegmentError(
                f"segment needs increasing timestamps, got {self.t0} -> {self.t1}")

    @property
    def span(self) -> TimeInterval:
        return TimeInterval(self.t0, self.t1)

    @property
    def k_x(self) -> float:
        return (self.x1 - self.x0) / ((self.t1 - self.t0) / MS_PER_S)

    @property
    def k_y(self) -> float:
        return (self.y1 - self.y0) / ((self.t1 - self.t0) / MS_PER_S)

    @property
    def b_x(self) -> float:
        ta, tb = self.t0 / MS_PER_S, self.t1 / MS_PER_S
        return (self.x0 * tb - self.x1 * ta) / (tb - ta)

    @property
    def b_y(self) -> float:
        ta, tb = self.t0 / MS_PER_S, self.t1 / MS_PER_S
        return (self.y0 * tb - self.y1 * ta) / (tb - ta)

    @property
    def mbr(self) -> Rect:
        return Rect(min(self.x0, self.x1), min(self.y0, self.y1),
                    max(self.x0, self.x1), max(self.y0, self.y1))

    def position_at(self, t: float) -> tuple[float, float]:
        if t == self.t0:
            return (self.x0, self.y0)
        if t == self.t1:
            return (self.x1, self.y1)
        f = (t - self.t0) / (self.t1 - self.t0)
        return (self.x0 + f * (self.x1 - self.x0), self.y0 + f * (self.y1 - self.y0))

    def sub_motion(self, t_start: int, t_end: int) -> "SegmentMotion":
        """Same motion restricted to ``[t_start, t_end]``."""
        xa, ya = self.position_at(t_start)
        xb, yb = self.position_at(t_end)
        return SegmentMotion(xa, ya, t_start, xb, yb, t_end)


def motion_coeffs(p_a: TrajPoint, p_b: TrajPoint) -> SegmentMotion:
    if p_a.t == p_b.t:
        raise DegenerateSegmentError(f"both points carry timestamp {p_a.t}")
    return SegmentMotion(p_a.x, p_a.y, p_a.t, p_b.x, p_b.y, p_b.t)


@dataclass(frozen=True)
class Trajectory:
    client_id: Hashable
    local_id: Hashable
    points: tuple[TrajPoint, ...] = field(repr=False)

    def __post_init__(self):
        pts = tuple(p if isinstance(p, TrajPoint) else TrajPoint(*p) for p in self.points)
        object.__setattr__(self, "points", pts)
        if len(pts) < 2:
            raise ParameterError(
                f"trajectory {self.client_id}/{self.local_id} needs at least 2 points")
        for a, b in zip(pts, pts[1:]):
            if not a.t < b.t:
                raise DegenerateSegmentError(
                    f"trajectory {self.client_id}/{self.local_id}: timestamps must be "
                    f"strictly increasing ({a.t} then {b.t})")
        for p in pts:
            if not (math.isfinite(p.x) and math.isfinite(p.y)) or p.t < 0:
                raise ParameterError(f"invalid point {p}")

    def __len__(self):
        return len(self.points)

    @property
    def key(self) -> tuple:
        return (self.client_id, self.local_id)

    @property
    def span(self) -> TimeInterval:
        return TimeInterval(self.points[0].t, self.points[-1].t)

    @cached_property
    def timestamps(self) -> list[int]:
        return [p.t for p in self.points]

    @cached_property
    def segments(self) -> tuple[SegmentMotion, ...]:
        return tuple(motion_coeffs(a, b) for a, b in zip(self.points, self.points[1:]))

    def with_points(self, points: Sequence[TrajPoint]) -> "Trajectory":
        return Trajectory(self.client_id, self.local_id, tuple(points))


def interpolate_position(traj: Trajectory, t: float) -> tuple[float, float]:
    ts = traj.timestamps
    if t < ts[0] or t > ts[-1]:
        raise OutOfRangeError(f"t={t} outside trajectory span [{ts[0]}, {ts[-1]}]")
    i = bisect.bisect_right(ts, t) - 1
    if i == len(ts) - 1:
        p = traj.points[-1]
        return (p.x, p.y)
    return traj.segments[i].position_at(t)


def overlapping_span(a: TimeInterval, b: TimeInterval) -> Optional[TimeInterval]:
    start = max(a.start, b.start)
    end = min(a.end, b.end)
    if start > end:
        return None
    return TimeInterval(start, end)


def _close_window(s_data: SegmentMotion, s_query: SegmentMotion,
                  delta_d: float) -> Optional[tuple[float, float, float]]:
    """Solve the close-distance inequality on the overlap of two segments.

    Returns ``(t_ref_ms, lo_s, hi_s)``: the window is
    ``[t_ref + lo, t_ref + hi]`` with offsets in seconds.  The quadratic is
    written in time relative to the overlap start ``t_ref``; it has the same
    coefficients as the absolute-time form up to that shift but avoids
    cancellation with large timestamps.
    """
    t_ref = max(s_data.t0, s_query.t0)
    t_end = min(s_data.t1, s_query.t1)
    if t_ref > t_end:
        return None
    length = (t_end - t_ref) / MS_PER_S

    xa, ya = s_data.position_at(t_ref)
    xb, yb = s_query.position_at(t_ref)
    dx, dy = xa - xb, ya - yb
    dvx, dvy = s_data.k_x - s_query.k_x, s_data.k_y - s_query.k_y

    a = dvx * dvx + dvy * dvy
    b = 2.0 * (dx * dvx + dy * dvy)
    c = dx * dx + dy * dy - delta_d * delta_d

    if a == 0.0:
        # equal velocities: the relative position is constant
        assert b == 0.0
        return (t_ref, 0.0, length) if c <= 0.0 else None

    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        # includes the [-1e-12, 0) tangency band, whose window has no length
        return None
    sq = math.sqrt(disc)
    q = -0.5 * (b + math.copysign(sq, b))
    r1 = q / a
    r2 = c / q if q != 0.0 else r1
    lo, hi = (r1, r2) if r1 <= r2 else (r2, r1)
    lo = max(lo, 0.0)
    hi = min(hi, length)
    if lo > hi:
        return None
    return (t_ref, lo, hi)


def close_distance_interval(s_data: SegmentMotion, s_query: SegmentMotion,
                            delta_d: float) -> Optional[TimeInterval]:
    """Maximal window of the segments' overlap where they are within ``delta_d``."""
    if not delta_d > 0:
        raise ParameterError(f"delta_d must be positive, got {delta_d}")
    w = _close_window(s_data, s_query, delta_d)
    if w is None:
        return None
    t_ref, lo, hi = w
    return TimeInterval(t_ref + lo * MS_PER_S, t_ref + hi * MS_PER_S)


def cdd(s_data: SegmentMotion, s_query: SegmentMotion, delta_d: float) -> float:
    """Close-distance duration of two segments, in seconds."""
    if not delta_d > 0:
        raise ParameterError(f"delta_d must be positive, got {delta_d}")
    w = _close_window(s_data, s_query, delta_d)
    return 0.0 if w is None else w[2] - w[1]


def overlapping_segment_pairs(t_a: Trajectory, t_b: Trajectory) -> Iterator[tuple[int, int]]:
    """Index pairs ``(i, j)`` of segments whose spans overlap with positive length.

    Pairs that only touch at one instant are skipped; their CDD is zero.
    """
    sa, sb = t_a.segments, t_b.segments
    i = j = 0
    while i < len(sa) and j < len(sb):
        a, b = sa[i], sb[j]
        if a.t0 < b.t1 and b.t0 < a.t1:
            yield i, j
        if a.t1 < b.t1:
            i += 1
        elif b.t1 < a.t1:
            j += 1
        else:
            i += 1
            j += 1


def cdds(t_a: Trajectory, t_b: Trajectory, delta_d: float) -> float:
    """Close-distance duration similarity of two trajectories, in seconds."""
    if not delta_d > 0:
        raise ParameterError(f"delta_d must be positive, got {delta_d}")
    sa, sb = t_a.segments, t_b.segments
    # fsum is exactly rounded, so the result does not depend on summation order
    return math.fsum(cdd(sa[i], sb[j], delta_d) for i, j in overlapping_segment_pairs(t_a, t_b))
