"""End-to-end plumbing: trajectory files, synthetic data, the brute-force
oracle and the simplify -> obfuscate -> index -> join -> verify pipeline."""
from __future__ import annotations

import csv
import io
import logging
import math
import time
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Hashable, Iterable, Optional, Sequence, Union

import numpy as np

from .client import ClientStore, verify_pairs
from .errors import StsJoinError, TrajectoryFormatError
from .geometry import Rect, Trajectory, TrajPoint, cdds
from .index import IndexConfig, StsIndex, trajectory_refs
from .join import QueryParams, server_join
from .metrics import JoinMetrics
from .obfuscation import NoiseParams, client_rng, obfuscate_trajectory
from .simplify import simplify_indices

log = logging.getLogger(__name__)

TRAJ_HEADER = ["client_id", "traj_id", "seq", "t_ms", "x_m", "y_m"]
RESULT_HEADER = ["query_traj", "client_id", "data_traj", "cdds_s"]

PathLike = Union[str, Path]
Row = tuple[Hashable, Hashable, Hashable, float]  # query, client, data traj, cdds


def _id_key(v):
    return str(v)


# ------------------------------------------------------------------ files

def read_trajectories(text: Iterable[str]) -> list[Trajectory]:
    reader = csv.reader(text)
    header = next(reader, None)
    if header is None:
        return []
    if [h.strip() for h in header] != TRAJ_HEADER:
        raise TrajectoryFormatError(f"expected header {','.join(TRAJ_HEADER)}", 1)
    groups: dict[tuple, list] = defaultdict(list)
    first_line = {}
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(TRAJ_HEADER):
            raise TrajectoryFormatError(f"expected {len(TRAJ_HEADER)} fields, got {len(row)}", lineno)
        cid, tid = row[0].strip(), row[1].strip()
        try:
            seq, t = int(row[2]), int(row[3])
            x, y = float(row[4]), float(row[5])
        except ValueError as e:
            raise TrajectoryFormatError(str(e), lineno) from None
        if not (math.isfinite(x) and math.isfinite(y)):
            raise TrajectoryFormatError(f"non-finite coordinate ({x}, {y})", lineno)
        groups[(cid, tid)].append((seq, lineno, TrajPoint(x, y, t)))
        first_line.setdefault((cid, tid), lineno)
    out = []
    for (cid, tid), rows in groups.items():
        rows.sort()
        seqs = [r[0] for r in rows]
        if len(set(seqs)) != len(seqs):
            raise TrajectoryFormatError(f"trajectory {cid}/{tid}: repeated seq", first_line[(cid, tid)])
        try:
            out.append(Trajectory(cid, tid, tuple(r[2] for r in rows)))
        except StsJoinError as e:
            # a bad trajectory is dropped; the rest of the file is still usable
            log.warning("line %d: skipping trajectory %s/%s: %s", first_line[(cid, tid)], cid, tid, e)
    return out


def load_trajectories(path: PathLike) -> list[Trajectory]:
    with open(path, newline="") as f:
        return read_trajectories(f)


def format_trajectories(trajs: Iterable[Trajectory]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRAJ_HEADER)
    for tr in trajs:
        for seq, p in enumerate(tr.points):
            w.writerow([tr.client_id, tr.local_id, seq, p.t, repr(float(p.x)), repr(float(p.y))])
    return buf.getvalue()


def write_trajectories(path: PathLike, trajs: Iterable[Trajectory]):
    Path(path).write_text(format_trajectories(trajs))


def format_results(rows: Iterable[Row]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULT_HEADER)
    for q, c, d, s in rows:
        w.writerow([q, c, d, f"{s:.6f}"])
    return buf.getvalue()


def sort_rows(rows: Iterable[Row]) -> list[Row]:
    return sorted(rows, key=lambda r: (_id_key(r[1]), _id_key(r[2]), _id_key(r[0])))


# ------------------------------------------------------------------ synthetic data

@dataclass(frozen=True)
class SyntheticSpec:
    num_clients: int = 10
    trajs_per_client: int = 10
    points_per_traj: int = 51
    side: float = 10_000.0
    horizon_s: float = 7200.0
    cluster_centers: int = 0
    # defaults give segments of about 30 m every 4.5 s, as in city vehicle traces
    speed: tuple[float, float] = (1.0, 12.0)
    sample_s: tuple[float, float] = (3.0, 6.0)
    seed: int = 0

    def __post_init__(self):
        counts = (self.num_clients, self.trajs_per_client, self.points_per_traj - 1)
        if min(counts) < 1 or self.side <= 0 or self.horizon_s <= 0:
            raise ValueError(f"invalid synthetic parameters {self}")
        if self.cluster_centers < 0:
            raise ValueError("cluster_centers must be >= 0")

    @property
    def cluster_sigma(self) -> float:
        return self.side / 20.0


def cluster_centres(spec: SyntheticSpec) -> np.ndarray:
    rng = np.random.default_rng([spec.seed, 1])
    lo, hi = 0.2 * spec.side, 0.8 * spec.side
    return rng.uniform(lo, hi, (spec.cluster_centers, 2))


def generate_synthetic(spec: SyntheticSpec) -> list[Trajectory]:
    """Random-waypoint trajectories, uniform or around Gaussian centres."""
    rng = np.random.default_rng([spec.seed, 0])
    centres = cluster_centres(spec)
    sigma = spec.cluster_sigma

    def waypoint(home):
        if home is None:
            p = rng.uniform(0, spec.side, 2)
        else:
            p = rng.normal(home, sigma)
        return np.clip(p, 0.0, spec.side)

    out = []
    n_seg = spec.points_per_traj - 1
    for c in range(spec.num_clients):
        for k in range(spec.trajs_per_client):
            home = centres[rng.integers(len(centres))] if len(centres) else None
            steps = rng.integers(int(spec.sample_s[0] * 1000), int(spec.sample_s[1] * 1000) + 1, n_seg)
            total = int(steps.sum())
            latest = max(0, int(spec.horizon_s * 1000) - total)
            t = int(rng.integers(0, latest + 1))
            pos = waypoint(home)
            target = waypoint(home)
            speed = rng.uniform(*spec.speed)
            pts = [TrajPoint(float(pos[0]), float(pos[1]), t)]
            for dt in steps:
                travel = speed * dt / 1000.0
                while True:
                    gap = target - pos
                    dist = float(np.hypot(*gap))
                    if dist > travel:
                        pos = pos + gap * (travel / dist)
                        break
                    pos, travel = target, travel - dist
                    target = waypoint(home)
                    speed = rng.uniform(*spec.speed)
                t += int(dt)
                pts.append(TrajPoint(float(pos[0]), float(pos[1]), t))
            out.append(Trajectory(f"c{c}", f"c{c}t{k}", tuple(pts)))
    return out


def companion_queries(data: Sequence[Trajectory], count: int, seed: int = 0,
                      offset: float = 15.0, jitter: float = 5.0,
                      client_id: Hashable = "q") -> list[Trajectory]:
    """Query trajectories that shadow random data trajectories for part of their life.

    Each query follows a chosen trajectory at a fixed lateral offset with
    jittered positions over a random sub-span, so joins find real contacts.
    """
    rng = np.random.default_rng([seed, 2])
    out = []
    for k in range(count):
        src = data[int(rng.integers(len(data)))]
        n = len(src.points)
        a = int(rng.integers(0, max(1, n // 2)))
        b = int(rng.integers(min(n, a + 3), n + 1))
        ang = rng.uniform(0, 2 * np.pi)
        dx, dy = offset * np.cos(ang), offset * np.sin(ang)
        pts = []
        for p in src.points[a:b]:
            ex, ey = rng.normal(0, jitter, 2)
            pts.append(TrajPoint(p.x + dx + ex, p.y + dy + ey, p.t + int(rng.integers(0, 500))))
        pts = [p for i, p in enumerate(pts) if i == 0 or p.t > pts[i - 1].t]
        out.append(Trajectory(client_id, f"q{k}", tuple(pts)))
    return out


# ------------------------------------------------------------------ oracle

def _bbox(tr: Trajectory) -> Rect:
    xs = [p.x for p in tr.points]
    ys = [p.y for p in tr.points]
    return Rect(min(xs), min(ys), max(xs), max(ys))


def oracle_join(data: Sequence[Trajectory], queries: Sequence[Trajectory],
                delta_d: float, delta_t: float) -> list[Row]:
    """Every couple meeting the thresholds, by exhaustive nested loop."""
    params = QueryParams(delta_d, delta_t, 0.0, 0.0, "plain")
    boxes = [(_bbox(d).expand(delta_d), d.span) for d in data]
    rows = []
    for q in queries:
        qb, qs = _bbox(q), q.span
        for d, (db, ds) in zip(data, boxes):
            # couples that never overlap in time or space have cdds 0
            if ds.end <= qs.start or qs.end <= ds.start or not db.overlaps(qb):
                continue
            s = cdds(d, q, delta_d)
            if params.passes(s):
                rows.append((q.local_id, d.client_id, d.local_id, s))
    return sort_rows(rows)


# ------------------------------------------------------------------ pipeline

@dataclass
class PipelineConfig:
    params: QueryParams = field(default_factory=QueryParams)
    noise_b: Optional[float] = None
    btree_capacity: int = 100
    quad_capacity: int = 4
    leaf_interval_s: float = 1800
    bitmap_interval_s: float = 30
    seed: int = 0
    workers: int = 1


@dataclass
class PipelineResult:
    rows: list[Row]
    metrics: JoinMetrics
    index: StsIndex
    stage_ms: dict[str, float]


class StageError(StsJoinError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage


def source_ranges(kept: Sequence[int]) -> list[tuple[int, int]]:
    return list(zip(kept, kept[1:]))


def space_bounds(trajs: Iterable[Trajectory], margin: float) -> Rect:
    """Square covering every point, grown by ``margin`` plus a little slack."""
    xs, ys = [], []
    for tr in trajs:
        for p in tr.points:
            xs.append(p.x)
            ys.append(p.y)
    if not xs:
        return Rect(0.0, 0.0, 1.0, 1.0)
    x0, y0 = min(xs) - margin, min(ys) - margin
    side = max(max(xs) - min(xs), max(ys) - min(ys)) + 2 * margin
    side = side * (1 + 1e-9) + 1.0
    return Rect(x0 - 0.5, y0 - 0.5, x0 - 0.5 + side, y0 - 0.5 + side)


def prepare_data(data: Sequence[Trajectory], cfg: PipelineConfig):
    """Simplify and obfuscate every trajectory; returns (published, source ranges)."""
    p = cfg.params
    noise = NoiseParams(p.theta_ob, cfg.noise_b, cfg.seed) if p.theta_ob > 0 else None
    by_client = defaultdict(list)
    for tr in data:
        by_client[tr.client_id].append(tr)
    published = []
    for cid in sorted(by_client, key=_id_key):
        rng = client_rng(cfg.seed, cid) if noise else None
        for tr in sorted(by_client[cid], key=lambda t: _id_key(t.local_id)):
            kept = simplify_indices(tr.points, p.theta_sp)
            simple = tr.with_points([tr.points[i] for i in kept])
            shown = obfuscate_trajectory(simple, noise, rng) if noise else simple
            published.append((shown, source_ranges(kept)))
    return published


def run_pipeline(data: Sequence[Trajectory], queries: Sequence[Trajectory],
                 cfg: PipelineConfig) -> PipelineResult:
    stage_ms = {}
    metrics = JoinMetrics()

    def stage(name, fn):
        t0 = time.perf_counter()
        try:
            return fn()
        except StsJoinError as e:
            raise StageError(name, e) from e
        finally:
            stage_ms[name] = (time.perf_counter() - t0) * 1000.0

    published = stage("prepare", lambda: prepare_data(data, cfg))
    margin = cfg.params.theta_ob
    config = IndexConfig(space_bounds(data, margin), cfg.btree_capacity, cfg.quad_capacity,
                         cfg.leaf_interval_s, cfg.bitmap_interval_s)

    def build():
        index = StsIndex(config)
        for tr, ranges in published:
            for ref in trajectory_refs(tr, ranges):
                index.insert_segment(ref)
        return index

    index = stage("build", build)
    batches = stage("join", lambda: server_join(index, queries, cfg.params, metrics, cfg.workers))

    def verify():
        stores = {}
        for tr in data:
            stores.setdefault(tr.client_id, ClientStore(tr.client_id)).register(tr)
        by_id = {q.local_id: q for q in queries}
        rows = []
        for cid, batch in batches.items():
            for local_id, qid, s in verify_pairs(stores[cid], batch, cfg.params, by_id):
                rows.append((qid, cid, local_id, s))
        return sort_rows(rows)

    rows = stage("verify", verify)
    return PipelineResult(rows, metrics, index, stage_ms)
