import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from potminer.ingest import Shot, Trajectory

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def linear_traj(tid, start, length, velocity, origin=(0.0, 0.0), fg=True):
    """Trajectory moving with constant velocity."""
    t = np.arange(length)[:, None]
    pts = np.asarray(origin, dtype=float) + t * np.asarray(velocity, dtype=float)
    return Trajectory(tid, start, pts, np.full(length, fg))


def shot_from_velocities(velocities, origins=None, shot_id=0):
    """Shot whose trajectory i moves with per-transition velocities ``velocities[i]``."""
    velocities = np.asarray(velocities, dtype=float)  # (T, N-1, 2)
    T, m, _ = velocities.shape
    trajs = []
    for i in range(T):
        o = np.zeros(2) if origins is None else np.asarray(origins[i], dtype=float)
        pts = np.vstack([o, o + np.cumsum(velocities[i], axis=0)])
        trajs.append(Trajectory(i, 0, pts, np.ones(m + 1, dtype=bool)))
    return Shot(shot_id, m + 1, tuple(trajs))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def front_end(shots, K=100, restarts=2, seed=0, n=10):
    """Run stats, PoT selection, a shared codebook and quantization.

    Returns ``[(shot, stats, pot_frames, codewords)]`` and the codebook size.
    """
    from potminer.codebook import build_codebook, quantize_many
    from potminer.ingest import compute_frame_motion_stats
    from potminer.pot import SelectionConfig, extract_pots

    data = []
    for sh in shots:
        st = compute_frame_motion_stats(sh, n)
        data.append((sh, st, extract_pots(sh, st, SelectionConfig(n=n))))
    X = np.vstack([p.descriptor.vector() for _, _, ps in data for p in ps])
    cb = build_codebook(X, K, restarts=restarts, seed=seed)
    out = []
    for sh, st, ps in data:
        f = np.array([p.start_frame for p in ps], dtype=np.int64)
        cw = quantize_many(np.array([p.descriptor.vector() for p in ps]), cb)
        out.append((sh, st, f, cw))
    return out, cb.K


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE: dict[int, str] = {}


def record_criterion(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[number])
