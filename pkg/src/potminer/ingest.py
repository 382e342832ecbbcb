"""Trajectory data model, dataset file I/O and per-frame motion statistics.

Dataset files are line oriented::

    shot <shot_id> <num_frames>
    traj <id> <start_frame> <x0> <y0> <fg0> <x1> <y1> <fg1> ...
    labels <l0> <l1> ... <l_{num_frames-1}>

Velocities are forward differences: transition ``k`` goes from frame ``k`` to
frame ``k + 1`` and a trajectory contributes to it only when it is foreground
at both frames.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from os import PathLike
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class DatasetFormatError(ValueError):
    """Malformed record in a dataset file."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(ValueError):
    """A trajectory or shot violates its invariants."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Trajectory:
    id: int
    start_frame: int
    points: np.ndarray  # (L, 2) float64
    fg: np.ndarray  # (L,) bool

    def __post_init__(self):
        points = np.array(self.points, dtype=np.float64).reshape(-1, 2)
        fg = np.array(self.fg, dtype=bool).reshape(-1)
        if len(points) < 2:
            raise ValidationError(f"trajectory {self.id}: needs at least 2 points")
        if len(fg) != len(points):
            raise ValidationError(
                f"trajectory {self.id}: fg has {len(fg)} entries for {len(points)} points"
            )
        if not np.all(np.isfinite(points)):
            raise ValidationError(f"trajectory {self.id}: non-finite coordinates")
        object.__setattr__(self, "id", int(self.id))
        object.__setattr__(self, "start_frame", int(self.start_frame))
        object.__setattr__(self, "points", _frozen(points))
        object.__setattr__(self, "fg", _frozen(fg))

    def __len__(self) -> int:
        return len(self.points)

    @property
    def end_frame(self) -> int:
        """One past the last covered frame."""
        return self.start_frame + len(self.points)

    def covers(self, first: int, last: int) -> bool:
        """True if frames ``first..last`` (inclusive) are all tracked."""
        return self.start_frame <= first and last < self.end_frame

    def foreground_over(self, first: int, last: int) -> bool:
        """True if the trajectory is tracked and foreground on ``first..last``."""
        if not self.covers(first, last):
            return False
        lo = first - self.start_frame
        return bool(self.fg[lo : last - self.start_frame + 1].all())

    def window(self, first: int, count: int) -> np.ndarray:
        """Positions on frames ``first .. first + count - 1``."""
        if not self.covers(first, first + count - 1):
            raise ValueError(
                f"trajectory {self.id} does not cover frames {first}..{first + count - 1}"
            )
        lo = first - self.start_frame
        return self.points[lo : lo + count]

    def velocity(self, k: int) -> np.ndarray:
        """Displacement over transition ``k`` (frame k to k+1)."""
        lo = k - self.start_frame
        return self.points[lo + 1] - self.points[lo]

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (
            self.id == other.id
            and self.start_frame == other.start_frame
            and np.array_equal(self.points, other.points)
            and np.array_equal(self.fg, other.fg)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Shot:
    shot_id: int
    num_frames: int
    trajectories: tuple[Trajectory, ...] = ()
    frame_labels: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "shot_id", int(self.shot_id))
        object.__setattr__(self, "num_frames", int(self.num_frames))
        object.__setattr__(self, "trajectories", tuple(self.trajectories))
        if self.frame_labels is not None:
            object.__setattr__(self, "frame_labels", tuple(str(s) for s in self.frame_labels))
        self.validate()

    def validate(self) -> None:
        if self.num_frames < 1:
            raise ValidationError(f"shot {self.shot_id}: num_frames must be positive")
        seen = set()
        for t in self.trajectories:
            if t.id in seen:
                raise ValidationError(f"shot {self.shot_id}: duplicate trajectory id {t.id}")
            seen.add(t.id)
            if t.start_frame < 0 or t.end_frame > self.num_frames:
                raise ValidationError(
                    f"shot {self.shot_id}: trajectory {t.id} spans frames "
                    f"[{t.start_frame}, {t.end_frame}) outside [0, {self.num_frames})"
                )
        if self.frame_labels is not None and len(self.frame_labels) != self.num_frames:
            raise ValidationError(
                f"shot {self.shot_id}: {len(self.frame_labels)} labels for {self.num_frames} frames"
            )

    def trajectory(self, traj_id: int) -> Trajectory:
        for t in self.trajectories:
            if t.id == traj_id:
                return t
        raise KeyError(traj_id)

    def __eq__(self, other):
        if not isinstance(other, Shot):
            return NotImplemented
        return (
            self.shot_id == other.shot_id
            and self.num_frames == other.num_frames
            and self.frame_labels == other.frame_labels
            and self.trajectories == other.trajectories
        )

    __hash__ = None


# --------------------------------------------------------------------------
# dataset file format


def format_coord(x: float) -> str:
    """Decimal text with at most 6 fractional digits, trailing zeros dropped."""
    s = f"{x:.6f}".rstrip("0").rstrip(".")
    if s in ("-0", ""):
        s = "0"
    return s


def quantize_coords(a: np.ndarray) -> np.ndarray:
    """Round coordinates to what the file format can represent exactly."""
    flat = [float(format_coord(v)) for v in np.asarray(a, dtype=np.float64).ravel()]
    return np.array(flat, dtype=np.float64).reshape(np.shape(a))


def format_shot(shot: Shot) -> str:
    lines = [f"shot {shot.shot_id} {shot.num_frames}"]
    for t in shot.trajectories:
        parts = [f"traj {t.id} {t.start_frame}"]
        for (x, y), f in zip(t.points, t.fg):
            parts.append(f"{format_coord(x)} {format_coord(y)} {int(f)}")
        lines.append(" ".join(parts))
    if shot.frame_labels is not None:
        lines.append("labels " + " ".join(shot.frame_labels))
    return "\n".join(lines) + "\n"


def save_dataset(shots: Iterable[Shot], path: str | PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for shot in shots:
            fh.write(format_shot(shot))


def _parse_int(tok: str, what: str, lineno: int) -> int:
    try:
        return int(tok)
    except ValueError:
        raise DatasetFormatError(f"bad {what} {tok!r}", lineno) from None


def parse_dataset(lines: Iterable[str]) -> list[Shot]:
    shots: list[Shot] = []
    cur: dict | None = None

    def finish():
        if cur is None:
            return
        try:
            shots.append(
                Shot(cur["id"], cur["n"], tuple(cur["trajs"]), cur["labels"])
            )
        except ValidationError as exc:
            raise ValidationError(f"{exc} (shot starting at line {cur['line']})") from None

    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tok = line.split()
        kind = tok[0]
        if kind == "shot":
            if len(tok) != 3:
                raise DatasetFormatError("expected 'shot <shot_id> <num_frames>'", lineno)
            finish()
            cur = {
                "id": _parse_int(tok[1], "shot id", lineno),
                "n": _parse_int(tok[2], "frame count", lineno),
                "trajs": [],
                "labels": None,
                "line": lineno,
            }
        elif kind == "traj":
            if cur is None:
                raise DatasetFormatError("trajectory record before any shot header", lineno)
            body = tok[3:]
            if len(tok) < 3 or len(body) % 3:
                raise DatasetFormatError(
                    "expected 'traj <id> <start> (<x> <y> <fg>)+'", lineno
                )
            tid = _parse_int(tok[1], "trajectory id", lineno)
            start = _parse_int(tok[2], "start frame", lineno)
            try:
                xy = np.array(
                    [[float(body[i]), float(body[i + 1])] for i in range(0, len(body), 3)],
                    dtype=np.float64,
                ).reshape(-1, 2)
            except ValueError:
                raise DatasetFormatError("bad coordinate", lineno) from None
            flags = body[2::3]
            if any(f not in ("0", "1") for f in flags):
                raise DatasetFormatError("foreground flag must be 0 or 1", lineno)
            fg = np.array([f == "1" for f in flags], dtype=bool)
            try:
                cur["trajs"].append(Trajectory(tid, start, xy, fg))
            except ValidationError as exc:
                raise ValidationError(f"line {lineno}: {exc}") from None
        elif kind == "labels":
            if cur is None:
                raise DatasetFormatError("labels record before any shot header", lineno)
            if cur["labels"] is not None:
                raise DatasetFormatError("duplicate labels record", lineno)
            cur["labels"] = tuple(tok[1:])
        else:
            raise DatasetFormatError(f"unknown record type {kind!r}", lineno)
    finish()
    return shots


def load_dataset(path: str | PathLike) -> list[Shot]:
    with open(Path(path), encoding="utf-8") as fh:
        return parse_dataset(fh)


# --------------------------------------------------------------------------
# motion statistics


@dataclass(frozen=True, eq=False)
class FrameMotionStats:
    """Per-transition foreground statistics of one shot.

    ``median_velocity`` is NaN where no foreground trajectory spans the
    transition (``present`` is False there; ``sigma`` is 0).
    """

    median_velocity: np.ndarray  # (N-1, 2)
    sigma: np.ndarray  # (N-1,)
    articulation_score: np.ndarray  # (max(N-n, 0),)
    present: np.ndarray  # (N-1,) bool
    n: int

    @property
    def num_transitions(self) -> int:
        return len(self.sigma)

    def window_present(self, f: int, n: int | None = None) -> bool:
        """True if the median velocity exists at every transition f..f+n-1."""
        n = self.n if n is None else n
        if f < 0 or f + n > len(self.present):
            return False
        return bool(self.present[f : f + n].all())


def dense_tracks(shot: Shot) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Trajectory ids, positions ``(T, N, 2)`` (NaN off-track), fg mask ``(T, N)``."""
    T, N = len(shot.trajectories), shot.num_frames
    ids = np.array([t.id for t in shot.trajectories], dtype=np.int64)
    pos = np.full((T, N, 2), np.nan)
    fg = np.zeros((T, N), dtype=bool)
    for i, t in enumerate(shot.trajectories):
        pos[i, t.start_frame : t.end_frame] = t.points
        fg[i, t.start_frame : t.end_frame] = t.fg
    return ids, pos, fg


def lower_median(values: np.ndarray, valid: np.ndarray) -> np.ndarray:
    """Lower median along axis 0 over entries where ``valid``; NaN if none."""
    filled = np.where(valid, values, np.inf)
    srt = np.sort(filled, axis=0)
    count = valid.sum(axis=0)
    idx = np.maximum(count - 1, 0) // 2
    out = np.take_along_axis(srt, idx[None], axis=0)[0]
    return np.where(count > 0, out, np.nan)


def articulation_scores(sigma: np.ndarray, n: int) -> np.ndarray:
    """s(f): mean of sigma over transitions f..f+n-1, for every f where it fits."""
    m = len(sigma) - n + 1
    if m <= 0:
        return np.zeros(0)
    return np.array([sigma[f : f + n].mean() for f in range(m)])


def compute_frame_motion_stats(shot: Shot, n: int) -> FrameMotionStats:
    if n < 1:
        raise ValueError("window length n must be positive")
    _, pos, fg = dense_tracks(shot)
    N = shot.num_frames
    if len(shot.trajectories) == 0 or N < 2:
        z = max(N - 1, 0)
        return FrameMotionStats(
            np.full((z, 2), np.nan), np.zeros(z), articulation_scores(np.zeros(z), n),
            np.zeros(z, dtype=bool), n,
        )
    vel = pos[:, 1:] - pos[:, :-1]  # (T, N-1, 2)
    valid = fg[:, 1:] & fg[:, :-1]
    med = np.stack(
        [lower_median(vel[..., 0], valid), lower_median(vel[..., 1], valid)], axis=-1
    )
    present = valid.any(axis=0)

    speed = np.where(valid, np.hypot(vel[..., 0], vel[..., 1]), 0.0)
    count = valid.sum(axis=0)
    safe = np.maximum(count, 1)
    mean = speed.sum(axis=0) / safe
    var = (np.where(valid, (speed - mean) ** 2, 0.0)).sum(axis=0) / safe
    std = np.sqrt(var)
    with np.errstate(invalid="ignore", divide="ignore"):
        sigma = np.where(mean > 0, std / np.where(mean > 0, mean, 1.0), 0.0)
    sigma[~present] = 0.0

    for a in (med, sigma, present):
        a.setflags(write=False)
    s = articulation_scores(sigma, n)
    s.setflags(write=False)
    return FrameMotionStats(med, sigma, s, present, n)


# --------------------------------------------------------------------------
# stats dump


def write_stats(path, items: Sequence[tuple[int, FrameMotionStats]]) -> None:
    """One ``stats <shot> <k> <vx> <vy> <sigma> <s>`` line per transition."""
    with open(path, "w", encoding="utf-8") as fh:
        for shot_id, st in items:
            for k in range(st.num_transitions):
                vx, vy = st.median_velocity[k]
                s = st.articulation_score[k] if k < len(st.articulation_score) else math.nan
                fh.write(
                    f"stats {shot_id} {k} {float(vx)!r} {float(vy)!r} {float(st.sigma[k])!r} {float(s)!r}\n"
                )
