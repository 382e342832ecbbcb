"""Pairs of trajectories: ordering, scoring, selection and descriptors.

A PoT window starting at frame ``f`` spans the ``n`` transitions
``f .. f+n-1`` for scoring (frames ``f .. f+n``) and the ``n`` frames
``f .. f+n-1`` for the descriptor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .ingest import FrameMotionStats, Shot, Trajectory, dense_tracks

DEGENERATE_EPS = 1e-9


class DegenerateError(ValueError):
    """Relative (or single-trajectory) motion too small to normalize."""


@dataclass(frozen=True)
class SelectionConfig:
    n: int = 10
    theta_P: float = 0.15
    theta_F: float = 0.1
    # optional cap on the anchor-swing distance in the first frame, pixels
    max_pair_distance: float | None = None

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"n must be >= 2, got {self.n}")
        if not 0 < self.theta_P <= 1:
            raise ValueError(f"theta_P must lie in (0, 1], got {self.theta_P}")
        if self.theta_F < 0:
            raise ValueError(f"theta_F must be >= 0, got {self.theta_F}")


@dataclass(frozen=True)
class PoTCandidate:
    anchor_id: int
    swing_id: int
    start_frame: int
    window: int
    score: float


@dataclass(frozen=True, eq=False)
class PoTDescriptor:
    theta: float
    displacements: np.ndarray  # (n-1, 2), unit total length
    total_displacement: float

    def vector(self) -> np.ndarray:
        return np.concatenate([[self.theta], self.displacements.ravel()])

    @property
    def dim(self) -> int:
        return 1 + self.displacements.size


@dataclass(frozen=True, eq=False)
class PoT:
    """A selected pair together with its descriptor."""

    shot_id: int
    candidate: PoTCandidate
    descriptor: PoTDescriptor

    @property
    def start_frame(self) -> int:
        return self.candidate.start_frame


def descriptor_dim(n: int) -> int:
    return 2 * (n - 1) + 1


# --------------------------------------------------------------------------
# ordering and scoring


def _dev_sums(vel: np.ndarray, med: np.ndarray) -> np.ndarray:
    """Per-row sum of ||v^k - v_m^k|| for velocities ``(T, n, 2)``."""
    d = vel - med
    return np.hypot(d[..., 0], d[..., 1]).sum(axis=-1)


def _window_velocity(t: Trajectory, stats: FrameMotionStats, f: int, n: int) -> np.ndarray:
    if not t.foreground_over(f, f + n):
        raise ValueError(f"trajectory {t.id} is not foreground over frames {f}..{f + n}")
    if not stats.window_present(f, n):
        raise ValueError(f"median velocity absent inside window at frame {f}")
    lo = f - t.start_frame
    return t.points[lo + 1 : lo + n + 1] - t.points[lo : lo + n]


def deviation_sum(t: Trajectory, stats: FrameMotionStats, f: int, n: int) -> float:
    """Sum over transitions f..f+n-1 of ||v^k - v_m^k||."""
    v = _window_velocity(t, stats, f, n)
    return float(_dev_sums(v[None], stats.median_velocity[f : f + n])[0])


def order_pair(
    t_i: Trajectory, t_j: Trajectory, stats: FrameMotionStats, f: int, n: int
) -> tuple[int, int]:
    """Return ``(anchor_id, swing_id)``; the anchor deviates less from the median."""
    di = deviation_sum(t_i, stats, f, n)
    dj = deviation_sum(t_j, stats, f, n)
    if di < dj or (di == dj and t_i.id < t_j.id):
        return t_i.id, t_j.id
    return t_j.id, t_i.id


def score_candidate(
    anchor: Trajectory, swing: Trajectory, stats: FrameMotionStats, f: int, n: int
) -> float:
    """Sum over the window of swing deviation minus anchor deviation."""
    return deviation_sum(swing, stats, f, n) - deviation_sum(anchor, stats, f, n)


# --------------------------------------------------------------------------
# selection


def retained_count(m: int, theta_P: float) -> int:
    # tolerate float noise such as 0.15 * 20 = 3.0000000000000004
    return min(m, math.ceil(round(theta_P * m, 9)))


def _frame_candidates(
    ids: np.ndarray,
    dev: np.ndarray,
    theta_P: float,
    f: int,
    n: int,
    first_pos: np.ndarray | None,
    max_dist: float | None,
) -> list[PoTCandidate]:
    T = len(ids)
    if T < 2:
        return []
    ii, jj = np.triu_indices(T, k=1)
    if max_dist is not None:
        gap = np.hypot(*(first_pos[ii] - first_pos[jj]).T)
        keep = gap <= max_dist
        ii, jj = ii[keep], jj[keep]
    m = len(ii)
    if m == 0:
        return []
    di, dj = dev[ii], dev[jj]
    idi, idj = ids[ii], ids[jj]
    i_first = (di < dj) | ((di == dj) & (idi < idj))
    anchor = np.where(i_first, idi, idj)
    swing = np.where(i_first, idj, idi)
    score = np.where(i_first, dj - di, di - dj)
    order = np.lexsort((swing, anchor, -score))
    keep = order[: retained_count(m, theta_P)]
    return [
        PoTCandidate(int(anchor[q]), int(swing[q]), f, n, float(score[q])) for q in keep
    ]


def select_pots(
    shot: Shot, stats: FrameMotionStats, cfg: SelectionConfig
) -> dict[int, list[PoTCandidate]]:
    """Top-scoring ordered pairs per unpruned start frame.

    Frames with articulation score below ``theta_F`` (or without a full
    median-velocity window) are pruned and absent from the result.
    """
    if stats.n != cfg.n:
        raise ValueError(f"stats computed with n={stats.n}, selection uses n={cfg.n}")
    n = cfg.n
    ids, pos, fg = dense_tracks(shot)
    if len(ids) == 0:
        return {}
    out: dict[int, list[PoTCandidate]] = {}
    vel = pos[:, 1:] - pos[:, :-1]
    for f, s in enumerate(stats.articulation_score):
        if s < cfg.theta_F or not stats.window_present(f, n):
            continue
        ok = fg[:, f : f + n + 1].all(axis=1)
        if ok.sum() < 2:
            continue
        dev = _dev_sums(vel[ok, f : f + n], stats.median_velocity[f : f + n])
        cands = _frame_candidates(
            ids[ok], dev, cfg.theta_P, f, n, pos[ok, f], cfg.max_pair_distance
        )
        if cands:
            out[f] = cands
    return out


# --------------------------------------------------------------------------
# descriptors


def descriptor_from_positions(anchor_xy: np.ndarray, swing_xy: np.ndarray) -> PoTDescriptor:
    r = np.asarray(swing_xy, dtype=np.float64) - np.asarray(anchor_xy, dtype=np.float64)
    d = r[1:] - r[:-1]
    D = float(np.hypot(d[:, 0], d[:, 1]).sum())
    if not D >= DEGENERATE_EPS:
        raise DegenerateError(f"total relative displacement {D:.3g} below {DEGENERATE_EPS}")
    theta = math.atan2(r[0, 1], r[0, 0])
    if theta >= math.pi:
        theta -= 2 * math.pi
    disp = d / D
    disp.setflags(write=False)
    return PoTDescriptor(theta, disp, D)


def compute_descriptor(anchor: Trajectory, swing: Trajectory, f: int, n: int) -> PoTDescriptor:
    """Angle of the first anchor-to-swing vector plus normalized displacements."""
    return descriptor_from_positions(anchor.window(f, n), swing.window(f, n))


def compute_ts_descriptor(trajectory: Trajectory, f: int, n: int) -> np.ndarray:
    """Trajectory-shape baseline: n-1 displacements scaled to unit total length."""
    p = trajectory.window(f, n)
    d = p[1:] - p[:-1]
    total = float(np.hypot(d[:, 0], d[:, 1]).sum())
    if not total >= DEGENERATE_EPS:
        raise DegenerateError(f"total displacement {total:.3g} below {DEGENERATE_EPS}")
    return (d / total).ravel()


def extract_pots(shot: Shot, stats: FrameMotionStats, cfg: SelectionConfig) -> list[PoT]:
    """Select PoTs and describe them; rigid (degenerate) pairs are dropped."""
    by_id = {t.id: t for t in shot.trajectories}
    pots: list[PoT] = []
    for f, cands in sorted(select_pots(shot, stats, cfg).items()):
        for c in cands:
            try:
                desc = compute_descriptor(by_id[c.anchor_id], by_id[c.swing_id], f, cfg.n)
            except DegenerateError:
                continue
            pots.append(PoT(shot.shot_id, c, desc))
    return pots


def extract_ts(shot: Shot, n: int) -> list[tuple[int, int, np.ndarray]]:
    """TS descriptors ``(start_frame, trajectory_id, vector)`` for every fg window."""
    out = []
    for t in shot.trajectories:
        for f in range(t.start_frame, t.end_frame - n + 1):
            if not t.foreground_over(f, f + n - 1):
                continue
            try:
                out.append((f, t.id, compute_ts_descriptor(t, f, n)))
            except DegenerateError:
                continue
    out.sort(key=lambda x: (x[0], x[1]))
    return out


# --------------------------------------------------------------------------
# dump format


def format_pot(p: PoT) -> str:
    c, d = p.candidate, p.descriptor
    parts = [
        "pot", str(p.shot_id), str(c.start_frame), str(c.anchor_id), str(c.swing_id),
        repr(float(c.score)), repr(float(d.theta)),
    ]
    parts += [repr(float(v)) for v in d.displacements.ravel()]
    return " ".join(parts)


def write_pots(path, pots: Iterable[PoT]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in pots:
            fh.write(format_pot(p) + "\n")


@dataclass(frozen=True)
class PoTTable:
    """Columnar view of a PoT dump: one row per PoT."""

    shot_id: np.ndarray
    start_frame: np.ndarray
    anchor_id: np.ndarray
    swing_id: np.ndarray
    score: np.ndarray
    vectors: np.ndarray  # (rows, descriptor dim)


def read_pot_table(path) -> PoTTable:
    """Load a PoT dump straight into arrays; much faster than ``read_pots``."""
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().split()
    if not first:
        z = np.zeros(0, dtype=np.int64)
        return PoTTable(z, z, z, z, np.zeros(0), np.zeros((0, 0)))
    if first[0] != "pot" or len(first) < 9 or (len(first) - 7) % 2:
        raise ValueError(f"{path}:1: malformed pot record")
    ncol = len(first)
    try:
        data = np.loadtxt(path, usecols=range(1, ncol), ndmin=2, dtype=np.float64)
    except ValueError as e:
        raise ValueError(f"{path}: malformed pot records ({e})") from e
    ints = data[:, :4].astype(np.int64)
    return PoTTable(ints[:, 0], ints[:, 1], ints[:, 2], ints[:, 3], data[:, 4], data[:, 5:].copy())


def read_pots(path) -> Iterator[PoT]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            tok = line.split()
            if not tok:
                continue
            if tok[0] != "pot" or len(tok) < 9 or (len(tok) - 7) % 2:
                raise ValueError(f"{path}:{lineno}: malformed pot record")
            shot_id, f, a, s = (int(x) for x in tok[1:5])
            score, theta = float(tok[5]), float(tok[6])
            disp = np.array([float(x) for x in tok[7:]]).reshape(-1, 2)
            n = len(disp) + 1
            D = math.nan
            disp.setflags(write=False)
            yield PoT(shot_id, PoTCandidate(a, s, f, n, score), PoTDescriptor(theta, disp, D))
