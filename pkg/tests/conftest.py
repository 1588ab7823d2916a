import numpy as np
import pytest

from stsjoin.geometry import TrajPoint, Trajectory


def make_traj(points, client_id="c0", local_id="t0"):
    return Trajectory(client_id, local_id, tuple(TrajPoint(float(x), float(y), int(t)) for x, y, t in points))


def random_walk(rng, n_points, *, client_id="c0", local_id="t0", t0=0, step_ms=(2000, 8000),
                speed=(0.5, 15.0), origin=(0.0, 0.0), spread=200.0):
    """Random constant-speed walk with jittered sampling intervals."""
    x = origin[0] + rng.uniform(-spread, spread)
    y = origin[1] + rng.uniform(-spread, spread)
    t = int(t0)
    pts = [TrajPoint(x, y, t)]
    heading = rng.uniform(0, 2 * np.pi)
    for _ in range(n_points - 1):
        dt = int(rng.integers(step_ms[0], step_ms[1] + 1))
        heading += rng.normal(0, 0.6)
        v = rng.uniform(*speed)
        x += np.cos(heading) * v * dt / 1000.0
        y += np.sin(heading) * v * dt / 1000.0
        t += dt
        pts.append(TrajPoint(float(x), float(y), t))
    return Trajectory(client_id, local_id, tuple(pts))


def dense_positions(traj, ts_ms):
    """Vectorised linear interpolation at integer-ms sample times."""
    t = np.array([p.t for p in traj.points], dtype=float)
    x = np.array([p.x for p in traj.points])
    y = np.array([p.y for p in traj.points])
    return np.interp(ts_ms, t, x), np.interp(ts_ms, t, y)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one line per acceptance criterion, printed after the run
ACCEPTANCE: dict[str, str] = {}


def record(criterion: str, ok: bool, detail: str):
    ACCEPTANCE[criterion] = f"{criterion}: {'PASS' if ok else 'FAIL'} ({detail})"
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE, key=lambda k: int(k.split()[1].rstrip("ab"))):
            terminalreporter.write_line(ACCEPTANCE[key])
