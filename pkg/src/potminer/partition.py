"""Split shots into single-pattern intervals using pauses and periodic motion.

Periodicity works on the per-frame BoW sequence of an interval: each codeword
gives a one-dimensional signal, the magnitude spectra of all codewords are
summed, and the height of the tallest admissible peak (as a fraction of the
non-DC spectral energy) decides whether a window is periodic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .ingest import FrameMotionStats

ORIGINS = ("whole-shot", "pause-split", "periodic", "remainder")
MIN_PAUSE = 3
MIN_REMAINDER = 5
LENGTH_STEP = 1.25
REFINE_ROUNDS = 4


@dataclass(frozen=True)
class Interval:
    shot_id: int
    start_frame: int
    end_frame: int  # exclusive
    origin: str = "whole-shot"
    period: float | None = None

    def __post_init__(self):
        if not 0 <= self.start_frame < self.end_frame:
            raise ValueError(f"bad interval [{self.start_frame}, {self.end_frame})")
        if self.origin not in ORIGINS:
            raise ValueError(f"unknown interval origin {self.origin!r}")

    def __len__(self) -> int:
        return self.end_frame - self.start_frame


@dataclass(frozen=True)
class PeriodicityConfig:
    theta_H: float = 0.1
    min_period: int = 5
    min_cycles: int = 3
    refine: bool = True

    def __post_init__(self):
        if not self.theta_H > 0:
            raise ValueError(f"theta_H must be positive, got {self.theta_H}")
        if self.min_period < 2:
            raise ValueError(f"min_period must be >= 2, got {self.min_period}")
        if self.min_cycles < 1:
            raise ValueError(f"min_cycles must be >= 1, got {self.min_cycles}")

    @property
    def min_length(self) -> int:
        return self.min_period * self.min_cycles


@dataclass(frozen=True)
class PeriodicWindow:
    start: int  # relative to the analysed sequence
    end: int
    period: float
    peak: float


# --------------------------------------------------------------------------
# pauses


def detect_pauses(
    stats: FrameMotionStats, theta_F: float, num_frames: int, min_length: int = MIN_PAUSE
) -> list[tuple[int, int]]:
    """Maximal runs of at least ``min_length`` frames with dispersion below theta_F.

    Frame ``k`` carries the dispersion of transition ``k``; the final frame has
    none, so a run reaching the last transition extends to the end of the shot.
    """
    still = np.asarray(stats.sigma) < theta_F
    pauses = []
    k, m = 0, len(still)
    while k < m:
        if not still[k]:
            k += 1
            continue
        j = k
        while j < m and still[j]:
            j += 1
        if j - k >= min_length:
            pauses.append((k, num_frames if j == m else j))
        k = j
    return pauses


def split_by_pauses(num_frames: int, pauses: Sequence[tuple[int, int]]) -> list[tuple[int, int]]:
    out, cur = [], 0
    for a, b in pauses:
        if a > cur:
            out.append((cur, a))
        cur = max(cur, b)
    if cur < num_frames:
        out.append((cur, num_frames))
    return out


# --------------------------------------------------------------------------
# per-frame BoW sequences


def framewise_codeword_sequence(
    start: int,
    end: int,
    pot_frames: np.ndarray,
    codewords: np.ndarray,
    K: int,
    span: int | None = None,
) -> np.ndarray:
    """``(end - start, K)`` array: row t is the BoW of PoTs starting at frame t.

    With ``span`` set to the PoT length, row t instead covers every PoT whose
    window contains frame t.
    """
    L = end - start
    counts = np.zeros((L, K))
    f = np.asarray(pot_frames, dtype=np.int64)
    c = np.asarray(codewords, dtype=np.int64)
    if span is None:
        sel = (f >= start) & (f < end)
        np.add.at(counts, (f[sel] - start, c[sel]), 1.0)
    else:
        for off in range(span):
            g = f + off
            sel = (g >= start) & (g < end)
            np.add.at(counts, (g[sel] - start, c[sel]), 1.0)
    tot = counts.sum(axis=1, keepdims=True)
    return np.divide(counts, tot, out=np.zeros_like(counts), where=tot > 0)


# --------------------------------------------------------------------------
# periodicity


def window_lengths(L: int, min_len: int) -> list[int]:
    out = []
    x = float(min_len)
    while x < L:
        w = int(round(x))
        if not out or w > out[-1]:
            out.append(w)
        x *= LENGTH_STEP
    if not out or out[-1] != L:
        out.append(L)
    return out


def window_starts(L: int, W: int) -> list[int]:
    stride = max(1, W // 8)
    starts = list(range(0, L - W + 1, stride))
    if starts[-1] != L - W:
        starts.append(L - W)
    return starts


def _active(seq: np.ndarray) -> np.ndarray:
    keep = seq.max(axis=0) > seq.min(axis=0)
    return seq[:, keep]


def spectrum_peak(
    windows: np.ndarray, cfg: PeriodicityConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Peak height and its frequency bin for a stack of windows ``(nw, W, C)``.

    Heights are fractions of the non-DC energy of the full (two-sided)
    summed magnitude spectrum. Admissible bins have a period of at least
    ``min_period`` frames and at least ``min_cycles`` cycles in the window.
    """
    nw, W, _ = windows.shape
    x = windows - windows.mean(axis=1, keepdims=True)
    mag = np.abs(np.fft.fft(x, axis=1)).sum(axis=2)  # (nw, W)
    power = mag**2
    total = power[:, 1:].sum(axis=1)
    lo = cfg.min_cycles
    hi = min(W // 2, int(math.floor(W / cfg.min_period)))
    if hi < lo:
        return np.zeros(nw), np.zeros(nw, dtype=np.int64)
    band = power[:, lo : hi + 1]
    k = np.argmax(band, axis=1)
    peak = band[np.arange(nw), k]
    with np.errstate(invalid="ignore", divide="ignore"):
        height = np.where(total > 1e-24, peak / np.where(total > 0, total, 1.0), 0.0)
    return height, k + lo


def _fit_energy(sums: dict, n: np.ndarray) -> np.ndarray:
    # explained energy of a centered 2-regressor fit, summed over codewords
    scc = sums["cc"] - sums["c"] ** 2 / n
    sss = sums["ss"] - sums["s"] ** 2 / n
    scs = sums["cs"] - sums["c"] * sums["s"] / n
    bc = sums["xc"] - sums["x"] * (sums["c"] / n)[..., None]
    bs = sums["xs"] - sums["x"] * (sums["s"] / n)[..., None]
    det = scc * sss - scs**2
    num = (sss[..., None] * bc**2 - 2 * scs[..., None] * bc * bs + scc[..., None] * bs**2).sum(-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(det > 1e-12, num / np.where(det > 1e-12, det, 1.0), 0.0)


def periodogram(seq: np.ndarray, omega: float, s, e) -> np.ndarray:
    """Energy explained by a least-squares sinusoid at ``omega`` on windows ``[s, e)``.

    Each codeword is fitted with ``m + a cos(omega t) + b sin(omega t)``; the
    result is the explained energy beyond the window mean, summed over
    codewords. Prefix sums make every window O(C).
    """
    seq = np.asarray(seq, dtype=np.float64)
    if seq.ndim == 1:
        seq = seq[:, None]
    s = np.atleast_1d(np.asarray(s, dtype=np.int64))
    e = np.atleast_1d(np.asarray(e, dtype=np.int64))
    t = np.arange(len(seq))
    c, si = np.cos(omega * t), np.sin(omega * t)

    def window_sum(a):
        pre = np.concatenate([np.zeros((1,) + a.shape[1:]), np.cumsum(a, axis=0)])
        return pre[e] - pre[s]

    sums = {
        "c": window_sum(c), "s": window_sum(si),
        "cc": window_sum(c * c), "ss": window_sum(si * si), "cs": window_sum(c * si),
        "x": window_sum(seq), "xc": window_sum(seq * c[:, None]), "xs": window_sum(seq * si[:, None]),
    }
    return _fit_energy(sums, (e - s).astype(np.float64))


def _refine_period(seq, s, e, period, cfg):
    # frequencies within half a bin of the current estimate
    k = (e - s) / period
    cycles = np.linspace(max(k - 0.5, 0.5), k + 0.5, 41)
    cand = (e - s) / cycles
    cand = cand[cand >= cfg.min_period]
    if len(cand) == 0:
        return period
    x = seq[s:e]
    wt = (2 * np.pi / cand)[:, None] * np.arange(s, e)[None, :]  # (P, n)
    c, si = np.cos(wt), np.sin(wt)
    sums = {
        "c": c.sum(1), "s": si.sum(1),
        "cc": (c * c).sum(1), "ss": (si * si).sum(1), "cs": (c * si).sum(1),
        "x": np.broadcast_to(x.sum(0), (len(cand), x.shape[1])), "xc": c @ x, "xs": si @ x,
    }
    vals = _fit_energy(sums, np.full(len(cand), float(e - s)))
    return float(cand[int(np.argmax(vals))])


def _refine_bounds(seq, s0, e0, period, cfg):
    L = len(seq)
    min_len = max(cfg.min_length, int(math.ceil(cfg.min_cycles * period)))
    mid = (s0 + e0) // 2
    ss, ee = np.meshgrid(np.arange(0, mid + 1), np.arange(mid + 1, L + 1), indexing="ij")
    ok = (ee - ss) >= min_len
    if not ok.any():
        return s0, e0
    s, e = ss[ok], ee[ok]
    q = periodogram(seq, 2 * np.pi / period, s, e)
    best = int(np.argmax(q))
    return int(s[best]), int(e[best])


def detect_periodic_interval(
    sequence: np.ndarray, cfg: PeriodicityConfig = PeriodicityConfig()
) -> PeriodicWindow | None:
    """Best periodic sub-window of a per-frame BoW sequence, or None.

    The window with the highest spectral peak over a grid of lengths and
    offsets is kept if the peak reaches ``theta_H``. With ``cfg.refine`` its
    period and boundaries are then tuned by maximizing the fixed-frequency
    periodogram, which is largest on the window that exactly covers the
    oscillation.
    """
    seq = np.asarray(sequence, dtype=np.float64)
    if seq.ndim == 1:
        seq = seq[:, None]
    L = len(seq)
    if L < cfg.min_length:
        return None
    seq = _active(seq)
    if seq.shape[1] == 0:
        return None

    best = None  # (height, start, W, bin)
    for W in window_lengths(L, cfg.min_length):
        starts = window_starts(L, W)
        idx = np.asarray(starts)[:, None] + np.arange(W)[None, :]
        height, k = spectrum_peak(seq[idx], cfg)
        j = int(np.argmax(height))
        if best is None or height[j] > best[0]:
            best = (float(height[j]), starts[j], W, int(k[j]))
    height, s, W, k = best
    if height < cfg.theta_H:
        return None
    e = s + W
    period = W / k
    if cfg.refine:
        for _ in range(REFINE_ROUNDS):
            period = _refine_period(seq, s, e, period, cfg)
            s1, e1 = _refine_bounds(seq, s, e, period, cfg)
            if (s1, e1) == (s, e):
                break
            s, e = s1, e1
        period = _refine_period(seq, s, e, period, cfg)
    return PeriodicWindow(s, e, period, height)


# --------------------------------------------------------------------------
# shot partitioning


def _peel(seq, offset, a, b, origin, shot_id, cfg) -> list[Interval]:
    res = detect_periodic_interval(seq[a - offset : b - offset], cfg)
    if res is None:
        return [Interval(shot_id, a, b, origin)]
    s, e = a + res.start, a + res.end
    if s - a < MIN_REMAINDER:
        s = a
    if b - e < MIN_REMAINDER:
        e = b
    out = []
    if s > a:
        out += _peel(seq, offset, a, s, "remainder", shot_id, cfg)
    out.append(Interval(shot_id, s, e, "periodic", res.period))
    if e < b:
        out += _peel(seq, offset, e, b, "remainder", shot_id, cfg)
    return out


def partition_range(
    shot_id: int,
    start: int,
    end: int,
    pot_frames: np.ndarray,
    codewords: np.ndarray,
    K: int,
    cfg: PeriodicityConfig = PeriodicityConfig(),
    origin: str = "whole-shot",
    span: int | None = None,
) -> list[Interval]:
    """Recursively peel periodic sub-intervals off ``[start, end)``."""
    seq = framewise_codeword_sequence(start, end, pot_frames, codewords, K, span)
    return _peel(seq, start, start, end, origin, shot_id, cfg)


def partition_shot(
    shot_id: int,
    num_frames: int,
    stats: FrameMotionStats,
    pot_frames: np.ndarray,
    codewords: np.ndarray,
    K: int,
    theta_F: float = 0.1,
    cfg: PeriodicityConfig = PeriodicityConfig(),
    span: int | None = None,
    periodic: bool = True,
) -> tuple[list[Interval], list[tuple[int, int]]]:
    """Intervals of one shot (temporal order) and the pause ranges between them."""
    pauses = detect_pauses(stats, theta_F, num_frames)
    pieces = split_by_pauses(num_frames, pauses)
    origin = "pause-split" if pauses else "whole-shot"
    out: list[Interval] = []
    for a, b in pieces:
        if periodic:
            out += partition_range(shot_id, a, b, pot_frames, codewords, K, cfg, origin, span)
        else:
            out.append(Interval(shot_id, a, b, origin))
    return out, pauses


# --------------------------------------------------------------------------
# interval list format


def format_interval(iv: Interval) -> str:
    s = f"interval {iv.shot_id} {iv.start_frame} {iv.end_frame} {iv.origin}"
    if iv.period is not None:
        s += f" {iv.period!r}"
    return s


def write_intervals(path, intervals: Iterable[Interval]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for iv in intervals:
            fh.write(format_interval(iv) + "\n")


def read_intervals(path) -> list[Interval]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            tok = line.split()
            if not tok:
                continue
            if tok[0] != "interval" or len(tok) not in (5, 6):
                raise ValueError(f"{path}:{lineno}: malformed interval record")
            period = float(tok[5]) if len(tok) == 6 else None
            out.append(Interval(int(tok[1]), int(tok[2]), int(tok[3]), tok[4], period))
    return out
