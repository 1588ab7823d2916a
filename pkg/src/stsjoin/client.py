"""Client-side store of original trajectories and exact candidate verification."""
from __future__ import annotations

import math
from typing import Hashable, Iterable, Mapping

from .errors import ParameterError, UnknownTrajectoryError
from .geometry import Trajectory, cdd
from .join import CandidatePair, QueryParams


class ClientStore:
    """Original trajectories of one client, keyed by local id."""

    def __init__(self, client_id: Hashable):
        self.client_id = client_id
        self.trajectories: dict[Hashable, Trajectory] = {}

    def __len__(self):
        return len(self.trajectories)

    def __contains__(self, local_id):
        return local_id in self.trajectories

    def register(self, traj: Trajectory):
        if traj.client_id != self.client_id:
            raise ParameterError(
                f"trajectory of client {traj.client_id!r} offered to client {self.client_id!r}")
        if traj.local_id in self.trajectories:
            raise ParameterError(f"client {self.client_id!r} already holds {traj.local_id!r}")
        self.trajectories[traj.local_id] = traj

    def get(self, local_id: Hashable) -> Trajectory:
        try:
            return self.trajectories[local_id]
        except KeyError:
            raise UnknownTrajectoryError(
                f"client {self.client_id!r} has no trajectory {local_id!r}") from None


def register_trajectory(store: ClientStore, traj: Trajectory):
    store.register(traj)


def verify_pairs(store: ClientStore, batch: Iterable[CandidatePair], params: QueryParams,
                 query_trajs: Mapping[Hashable, Trajectory]) -> list[tuple[Hashable, Hashable, float]]:
    """Exact CDDS of every couple named in ``batch``, filtered by ``delta_t``.

    Each candidate pair names a simplified data segment; the CDD is evaluated
    on every original segment it replaced.  Returns ``(local_id, query_id,
    cdds_s)`` sorted by ids.
    """
    pairs: dict[tuple, set[tuple[int, int]]] = {}
    batch = list(batch)
    # resolve every id before doing any work so a bad batch fails as a whole
    for p in batch:
        store.get(p.data_ref.local_traj_id)
    for p in batch:
        lo, hi = p.data_ref.source_range
        todo = pairs.setdefault((p.data_ref.local_traj_id, p.query_traj_id), set())
        todo.update((k, p.query_segment_index) for k in range(lo, hi))

    out = []
    for (local_id, query_id), todo in pairs.items():
        data = store.get(local_id).segments
        query = query_trajs[query_id].segments
        total = math.fsum(cdd(data[k], query[j], params.delta_d) for k, j in sorted(todo))
        if params.passes(total):
            out.append((local_id, query_id, total))
    out.sort(key=lambda r: (str(r[0]), str(r[1])))
    return out
