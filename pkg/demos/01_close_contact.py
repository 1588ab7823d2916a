"""Two walkers, one close contact.

Builds a pair of trajectories by hand, finds the windows where they are
within 100 m, and adds the windows up.
"""
from stsjoin.geometry import Trajectory, cdds, close_distance_interval


def hm(h, m, s=0):
    return ((h * 60 + m) * 60 + s) * 1000


def clock(ms):
    s = int(round(ms / 1000))
    return f"{s // 3600}:{s // 60 % 60:02d}:{s % 60:02d}"


mu = Trajectory("alice", "walk", [(0, 0, hm(7, 0)), (600, 0, hm(7, 10)), (600, 0, hm(7, 20))])
nu = Trajectory("bob", "walk", [(0, 60, hm(7, 2)), (800, 60, hm(7, 10)), (640, 60, hm(7, 14))])

# segment by segment; only pairs that share some time can meet
for i, a in enumerate(mu.segments):
    for j, b in enumerate(nu.segments):
        w = close_distance_interval(a, b, 100.0)
        if w is None:
            continue
        print(f"mu[{i}] x nu[{j}]: close from {clock(w.start)} to {clock(w.end)} ({w.duration_s:.0f} s)")

print("total close duration:", cdds(mu, nu, 100.0), "s")

# shrinking the radius can only shrink the total
for d in (100, 70, 61, 60, 50):
    print(f"  delta_d={d:>3}: {cdds(mu, nu, d):7.2f} s")
