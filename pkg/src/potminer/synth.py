"""Synthetic side-view quadruped shots with per-frame behavior labels.

The skeleton has a rigid seven-point torso from hip to shoulder, a back leg
hinged at the hip, a front leg hinged at the shoulder (knee and foot points
each) and a head chain (neck, head) hinged in front of the shoulder.
The torso holds a majority of the points, as it holds most of the tracked
pixels of a real animal, so the median velocity is always a torso velocity.
Joint angles are driven by one program per behavior; the behavior at frame
``t`` drives the transition from ``t`` to ``t + 1``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .ingest import Shot, Trajectory, quantize_coords

BEHAVIORS = ("walk", "run", "turn-head", "stretch", "still")
PERIODIC = ("walk", "run")

TORSO = tuple(range(7))
BACK_LEG = (7, 8)
FRONT_LEG = (9, 10)
HEAD = (11, 12)
NUM_POINTS = 13
POINT_NAMES = (
    "hip", "rump", "loin", "mid", "chest", "withers", "shoulder",
    "back_knee", "back_foot",
    "front_knee", "front_foot",
    "neck", "head",
)

THIGH = 15.0
SHIN = 15.0
# head-chain motion during gaits, relative to the leg swing
HEAD_SWAY = 0.3
HEAD_NOD = 0.2
# frames over which a segment blends in from the inherited pose
BLEND = 5
# per-behavior defaults: period (frames), amplitude (px at scale 1), speed (px/frame)
DEFAULTS = {
    "walk": dict(period=12.0, amplitude=16.0, velocity=2.0),
    "run": dict(period=6.0, amplitude=24.0, velocity=5.0),
    "turn-head": dict(period=0.0, amplitude=20.0, velocity=0.0),
    "stretch": dict(period=0.0, amplitude=15.0, velocity=0.0),
    "still": dict(period=0.0, amplitude=0.0, velocity=0.0),
}


@dataclass(frozen=True)
class Segment:
    behavior: str
    duration: int
    period: float | None = None
    amplitude: float | None = None
    velocity: float | None = None

    def __post_init__(self):
        if self.behavior not in BEHAVIORS:
            raise ValueError(f"unknown behavior {self.behavior!r}; expected one of {BEHAVIORS}")
        if self.duration < 1:
            raise ValueError(f"segment duration must be >= 1, got {self.duration}")
        d = DEFAULTS[self.behavior]
        for name in ("period", "amplitude", "velocity"):
            if getattr(self, name) is None:
                object.__setattr__(self, name, d[name])
        if self.behavior in PERIODIC and self.period < 2:
            raise ValueError(f"{self.behavior} needs period >= 2, got {self.period}")


@dataclass(frozen=True)
class BehaviorScript:
    segments: tuple[Segment, ...]
    noise: float = 0.3
    scale: float = 1.0
    background: int = 2
    background_velocity: tuple[float, float] = (-1.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        if not self.segments:
            raise ValueError("a script needs at least one segment")
        if self.noise < 0:
            raise ValueError("noise must be non-negative")
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        if self.background < 0:
            raise ValueError("background count must be non-negative")

    @property
    def num_frames(self) -> int:
        return sum(s.duration for s in self.segments)

    def frame_labels(self) -> tuple[str, ...]:
        return tuple(s.behavior for s in self.segments for _ in range(s.duration))


# --------------------------------------------------------------------------
# motion programs


@dataclass
class _Pose:
    body: np.ndarray = field(default_factory=lambda: np.zeros(2))
    back: np.ndarray = field(default_factory=lambda: np.zeros(2))  # thigh, knee angles
    front: np.ndarray = field(default_factory=lambda: np.zeros(2))
    head: float = 0.0
    nod: float = 0.0  # vertical offset of the head chain, px at scale 1


def _leg_points(hinge, thigh_angle, knee_angle, s):
    # angles measured from straight down, positive swings the leg forward (+x)
    a = thigh_angle
    knee = hinge + s * THIGH * np.array([math.sin(a), -math.cos(a)])
    b = a - knee_angle
    dirn = np.array([math.sin(b), -math.cos(b)])
    return [knee, knee + s * SHIN * dirn]


def _head_points(pivot, angle, s):
    base = np.array([[10.0, 10.0], [20.0, 17.0]])
    c, si = math.cos(angle), math.sin(angle)
    rot = np.array([[c, -si], [si, c]])
    return [pivot + s * (rot @ p) for p in base]


def skeleton_points(pose: _Pose, s: float) -> np.ndarray:
    """All points ``(NUM_POINTS, 2)`` for a pose at scale ``s``."""
    b = pose.body
    u = np.linspace(-1.0, 1.0, len(TORSO))
    torso = b + s * np.column_stack([20.0 * u, -2.0 * (1.0 - u**2)])  # slight arch
    hip, shoulder = torso[0], torso[-1]
    pts = list(torso)
    pts += _leg_points(hip, pose.back[0], pose.back[1], s)
    pts += _leg_points(shoulder, pose.front[0], pose.front[1], s)
    pts += _head_points(shoulder + s * np.array([2.0, 4.0 + pose.nod]), pose.head, s)
    return np.array(pts)


def _bump(u: float) -> float:
    # smooth 0 -> 1 -> 0 over u in [0, 1]
    return math.sin(math.pi * u) ** 2


def _program(seg: Segment, i: int, phase: float) -> np.ndarray:
    """Joint state ``(back thigh, back knee, front thigh, front knee, head, nod)``
    relative to the neutral pose, ``i`` frames into a segment."""
    out = np.zeros(6)
    if seg.behavior in PERIODIC:
        A = seg.amplitude / (THIGH + SHIN)  # foot excursion ~= amplitude
        bend = 0.8 * A * max(0.0, math.cos(phase))
        # the head nods once per stride
        c1 = math.cos(phase)
        out[:] = (A * math.sin(phase), bend, -A * math.sin(phase), -bend,
                  HEAD_SWAY * A * c1, HEAD_NOD * seg.amplitude * c1)
    elif seg.behavior == "turn-head":
        out[4] = (seg.amplitude / 18.0) * _bump(i / seg.duration)
    elif seg.behavior == "stretch":
        ext = (seg.amplitude / (THIGH + SHIN)) * _bump(i / seg.duration)
        out[:4] = (-0.5 * ext, 0.0, ext, -0.5 * ext)
    return out


def _joint_states(script: BehaviorScript, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Per-frame joint states ``(N, 6)`` and body positions ``(N, 2)``.

    Still segments hold the previous state exactly. Other segments follow
    their program, blended over the first few frames from the inherited
    state; gait phase carries over between consecutive gait segments.
    """
    s = script.scale
    joints = [np.zeros(6)]
    body = [np.zeros(2)]
    phase = float(rng.uniform(0, 2 * math.pi))
    prev_periodic = False
    for seg in script.segments:
        cur = joints[-1].copy()
        if seg.behavior == "still":
            for _ in range(seg.duration):
                joints.append(cur.copy())
                body.append(body[-1].copy())
            prev_periodic = False
            continue
        if seg.behavior in PERIODIC and not prev_periodic:
            phase = float(rng.uniform(0, 2 * math.pi))
        step = 2 * math.pi / seg.period if seg.behavior in PERIODIC else 0.0
        offset = cur - _program(seg, 0, phase)
        for i in range(1, seg.duration + 1):
            phase += step
            fade = max(0.0, 1.0 - i / BLEND)
            joints.append(_program(seg, i, phase) + fade * offset)
            body.append(body[-1] + np.array([seg.velocity * s, 0.0]))
        prev_periodic = seg.behavior in PERIODIC
    N = script.num_frames
    return np.array(joints[:N]), np.array(body[:N])


def generate_shot(script: BehaviorScript, seed, shot_id: int = 0) -> Shot:
    """Render a script into a labelled shot; deterministic in ``seed``."""
    rng = np.random.default_rng(seed)
    N = script.num_frames
    labels = script.frame_labels()
    origin = rng.uniform([50.0, 150.0], [150.0, 250.0])
    joints, body = _joint_states(script, rng)
    pts = np.stack([
        skeleton_points(_Pose(b, j[0:2], j[2:4], j[4], j[5]), script.scale)
        for j, b in zip(joints, body)
    ]) + origin  # (N, NUM_POINTS, 2)

    # jitter is redrawn only on frames reached by a moving transition, so
    # still segments have exactly zero velocity
    jitter = np.zeros_like(pts)
    cur = rng.normal(0.0, script.noise, size=(NUM_POINTS, 2))
    jitter[0] = cur
    for t in range(1, N):
        if labels[t - 1] != "still":
            cur = rng.normal(0.0, script.noise, size=(NUM_POINTS, 2))
        jitter[t] = cur
    pts = quantize_coords(pts + jitter)

    trajs = [Trajectory(i, 0, pts[:, i], np.ones(N, dtype=bool)) for i in range(NUM_POINTS)]
    vel = np.asarray(script.background_velocity, dtype=np.float64)
    for b in range(script.background):
        start = rng.uniform([0.0, 0.0], [400.0, 400.0])
        path = start + np.arange(N)[:, None] * vel + rng.normal(0.0, script.noise, size=(N, 2))
        trajs.append(Trajectory(NUM_POINTS + b, 0, quantize_coords(path), np.zeros(N, dtype=bool)))
    return Shot(shot_id, N, tuple(trajs), labels)


# --------------------------------------------------------------------------
# benchmark scripts


def random_segment(behavior: str, rng: np.random.Generator) -> Segment:
    if behavior == "walk":
        return Segment("walk", int(rng.integers(50, 86)), float(rng.uniform(11, 15)),
                       float(rng.uniform(15, 19)), float(rng.uniform(1.5, 2.5)))
    if behavior == "run":
        return Segment("run", int(rng.integers(50, 86)), float(rng.uniform(6, 7.5)),
                       float(rng.uniform(22, 28)), float(rng.uniform(4.0, 6.0)))
    if behavior == "turn-head":
        return Segment("turn-head", int(rng.integers(35, 51)), amplitude=float(rng.uniform(16, 24)))
    if behavior == "stretch":
        return Segment("stretch", int(rng.integers(35, 51)), amplitude=float(rng.uniform(12, 18)))
    if behavior == "still":
        return Segment("still", int(rng.integers(6, 16)))
    raise ValueError(f"unknown behavior {behavior!r}")


def benchmark_scripts(num_shots: int, seed, noise: float = 0.3) -> list[BehaviorScript]:
    """Two-behavior shots over walk, run, turn-head and stretch.

    Most shots separate the two behaviors with a still gap; about one in six
    switches from walk to run without one. Scales vary in [0.5, 2].
    """
    rng = np.random.default_rng(seed)
    active = ("walk", "run", "turn-head", "stretch")
    out = []
    for i in range(num_shots):
        scale = float(rng.uniform(0.5, 2.0))
        if i % 6 == 5:
            segs = [random_segment("walk", rng), random_segment("run", rng)]
        else:
            a, b = rng.choice(len(active), size=2, replace=False)
            segs = [random_segment(active[a], rng), random_segment("still", rng),
                    random_segment(active[b], rng)]
        out.append(BehaviorScript(tuple(segs), noise=noise, scale=scale))
    return out


def generate_dataset(scripts: Sequence[BehaviorScript], seed) -> list[Shot]:
    """One shot per script; shot ids are positions, seeds are spawned per shot."""
    children = np.random.SeedSequence(seed).spawn(len(scripts))
    return [generate_shot(sc, ch, shot_id=i) for i, (sc, ch) in enumerate(zip(scripts, children))]


# --------------------------------------------------------------------------
# script files


def script_from_dict(d: dict) -> BehaviorScript:
    if not isinstance(d, dict) or not isinstance(d.get("segments"), list):
        raise ValueError("behavior script needs a 'segments' list")
    unknown = set(d) - {"segments", "noise", "scale", "background", "background_velocity"}
    if unknown:
        raise ValueError(f"unknown script keys: {sorted(unknown)}")
    try:
        segs = tuple(Segment(**s) for s in d["segments"])
    except TypeError as e:
        raise ValueError(f"bad segment: {e}") from e
    kw = {k: d[k] for k in ("noise", "scale", "background") if k in d}
    if "background_velocity" in d:
        kw["background_velocity"] = tuple(d["background_velocity"])
    return BehaviorScript(segs, **kw)


def load_script(path) -> BehaviorScript:
    with open(path, encoding="utf-8") as fh:
        return script_from_dict(json.load(fh))


def rescaled(script: BehaviorScript, scale: float) -> BehaviorScript:
    return replace(script, scale=scale)
