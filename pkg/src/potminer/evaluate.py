"""Clustering quality (purity, ARI) and interval-level label statistics."""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass
from typing import Hashable, Iterable, Sequence

import numpy as np


def _check_pair(pred: Sequence, truth: Sequence) -> None:
    if len(pred) != len(truth):
        raise ValueError(f"label sequences differ in length: {len(pred)} vs {len(truth)}")
    if len(pred) == 0:
        raise ValueError("cannot score an empty clustering")


def _codes(labels: Sequence[Hashable]) -> np.ndarray:
    index: dict = {}
    return np.array([index.setdefault(x, len(index)) for x in labels], dtype=np.int64)


def contingency(pred: Sequence[Hashable], truth: Sequence[Hashable]) -> np.ndarray:
    """Counts ``n_ij`` of items in predicted cluster i with truth label j."""
    p, t = _codes(pred), _codes(truth)
    table = np.zeros((p.max() + 1, t.max() + 1), dtype=np.int64)
    np.add.at(table, (p, t), 1)
    return table


def purity(pred: Sequence[Hashable], truth: Sequence[Hashable]) -> float:
    """Fraction of items carrying their cluster's most frequent truth label."""
    _check_pair(pred, truth)
    table = contingency(pred, truth)
    return float(table.max(axis=1).sum() / len(pred))


def _comb2(x):
    x = np.asarray(x, dtype=np.int64)
    return x * (x - 1) // 2


def ari(pred: Sequence[Hashable], truth: Sequence[Hashable]) -> float:
    """Adjusted Rand Index from the contingency table; 0 in the degenerate case."""
    _check_pair(pred, truth)
    table = contingency(pred, truth)
    index = int(_comb2(table).sum())
    sa = int(_comb2(table.sum(axis=1)).sum())
    sb = int(_comb2(table.sum(axis=0)).sum())
    total = int(_comb2(len(pred)))
    max_index = (sa + sb) / 2
    expected = sa * sb / total if total else 0.0
    if max_index == expected:
        return 0.0
    return float((index - expected) / (max_index - expected))


# --------------------------------------------------------------------------
# interval labels


def majority_label(labels: Sequence[Hashable]) -> Hashable:
    """Most frequent label; ties go to the label that occurs first."""
    if len(labels) == 0:
        raise ValueError("no labels in interval")
    counts = Counter(labels)
    best = max(counts.values())
    for x in labels:
        if counts[x] == best:
            return x
    raise AssertionError("unreachable")


def interval_uniformity(start: int, end: int, frame_labels: Sequence[Hashable] | None) -> float:
    """Share of frames in ``[start, end)`` carrying the most frequent label."""
    if frame_labels is None:
        raise ValueError("interval uniformity needs frame labels")
    if not 0 <= start < end <= len(frame_labels):
        raise ValueError(f"interval [{start}, {end}) outside labelled range of {len(frame_labels)}")
    window = list(frame_labels[start:end])
    return Counter(window).most_common(1)[0][1] / len(window)


def mean_uniformity(intervals: Iterable, labels_by_shot: dict) -> float:
    vals = [
        interval_uniformity(iv.start_frame, iv.end_frame, labels_by_shot[iv.shot_id])
        for iv in intervals
    ]
    if not vals:
        raise ValueError("no intervals to score")
    return float(np.mean(vals))


@dataclass(frozen=True)
class LabeledInterval:
    shot_id: int
    start_frame: int
    end_frame: int
    cluster: int
    label: Hashable


def label_intervals(intervals: Sequence, clusters: Sequence[int], labels_by_shot: dict) -> list[LabeledInterval]:
    if len(intervals) != len(clusters):
        raise ValueError("every interval needs exactly one predicted cluster")
    out = []
    for iv, c in zip(intervals, clusters):
        lab = labels_by_shot.get(iv.shot_id)
        if lab is None:
            raise ValueError(f"shot {iv.shot_id} has no frame labels")
        out.append(
            LabeledInterval(
                iv.shot_id, iv.start_frame, iv.end_frame, int(c),
                majority_label(lab[iv.start_frame : iv.end_frame]),
            )
        )
    return out


def count_intervals_per_behavior(intervals: Iterable) -> dict[Hashable, int]:
    """Per behavior, the number of distinct shots with an interval of that majority label."""
    shots: dict[Hashable, set] = {}
    for iv in intervals:
        shots.setdefault(iv.label, set()).add(iv.shot_id)
    return {k: len(v) for k, v in shots.items()}


# --------------------------------------------------------------------------
# k-sweep report

METRIC_FIELDS = ("k", "purity", "ari", "num_intervals", "uniformity")


@dataclass(frozen=True)
class MetricsRow:
    k: int
    purity: float
    ari: float
    num_intervals: int
    uniformity: float


def write_metrics(path, rows: Iterable[MetricsRow]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRIC_FIELDS)
        for r in rows:
            w.writerow([r.k, repr(float(r.purity)), repr(float(r.ari)), r.num_intervals,
                        repr(float(r.uniformity))])


def read_metrics(path) -> list[MetricsRow]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != METRIC_FIELDS:
            raise ValueError(f"{path}: expected columns {','.join(METRIC_FIELDS)}")
        return [
            MetricsRow(int(r["k"]), float(r["purity"]), float(r["ari"]),
                       int(r["num_intervals"]), float(r["uniformity"]))
            for r in reader
        ]
