"""File-based pipeline: every stage reads its inputs from and writes its
outputs to one artifact directory, so any stage can be rerun on its own.

Stages, in order: stats, pot, codebook, partition, cluster, eval, report.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import cluster as cl
from . import evaluate as ev
from .codebook import bow, build_codebook, quantize_many, read_codebook, sample_rows, write_codebook
from .ingest import Shot, compute_frame_motion_stats, load_dataset, write_stats
from .partition import Interval, PeriodicityConfig, partition_shot, read_intervals, write_intervals
from .pot import (
    SelectionConfig, extract_pots, extract_ts, read_pot_table, write_pots,
)

log = logging.getLogger(__name__)

STAGES = ("stats", "pot", "codebook", "partition", "cluster", "eval", "report")
CHANNELS = ("pot", "ts")


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str, shot_id: int | None = None):
        self.stage = stage
        self.shot_id = shot_id
        where = f"stage {stage}" + (f", shot {shot_id}" if shot_id is not None else "")
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class PipelineConfig:
    n: int = 10
    theta_P: float = 0.15
    theta_F: float = 0.1
    theta_H: float = 0.1
    min_period: int = 5
    min_cycles: int = 3
    K: int = 800
    K_ts: int = 4000
    restarts: int = 8
    init: str = "random"
    standardize: bool = False
    max_sample: int = 1_000_000
    k: int = 5
    k_range: tuple[int, int] | None = None
    seed: int = 0
    channels: tuple[str, ...] = ("pot",)
    pauses: bool = True
    periodic: bool = True
    span_indexing: bool = False

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        if self.k_range is not None:
            object.__setattr__(self, "k_range", tuple(int(v) for v in self.k_range))
        self.validate()

    def validate(self) -> None:
        self.selection()
        self.periodicity()
        if self.K < 1 or self.K_ts < 1:
            raise ValueError("codebook sizes must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.init not in ("random", "kmeans++"):
            raise ValueError(f"unknown init {self.init!r}")
        if self.max_sample < 1:
            raise ValueError("max_sample must be positive")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.k_range is not None:
            lo, hi = self.k_range
            if not 1 <= lo <= hi:
                raise ValueError(f"bad k range {lo}:{hi}")
        if not self.channels or any(c not in CHANNELS for c in self.channels):
            raise ValueError(f"channels must be a non-empty subset of {CHANNELS}")
        if len(set(self.channels)) != len(self.channels):
            raise ValueError("duplicate channel")

    def selection(self) -> SelectionConfig:
        return SelectionConfig(self.n, self.theta_P, self.theta_F)

    def periodicity(self) -> PeriodicityConfig:
        return PeriodicityConfig(self.theta_H, self.min_period, self.min_cycles)

    def k_values(self) -> list[int]:
        if self.k_range is None:
            return [self.k]
        lo, hi = self.k_range
        ks = set(range(lo, hi + 1)) | {self.k}
        return sorted(ks)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["channels"] = list(self.channels)
        d["k_range"] = None if self.k_range is None else list(self.k_range)
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def config_from_dict(d: dict) -> PipelineConfig:
    known = {f.name for f in fields(PipelineConfig)}
    unknown = set(d) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    d = dict(d)
    if "channels" in d:
        d["channels"] = tuple(d["channels"])
    return PipelineConfig(**d)


def load_config(path) -> PipelineConfig:
    with open(path, encoding="utf-8") as fh:
        return config_from_dict(json.load(fh))


# --------------------------------------------------------------------------
# helpers


def _map(fn: Callable, items: Sequence, threads: int) -> list:
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def _per_shot(stage: str, fn: Callable[[Shot], object]) -> Callable[[Shot], object]:
    def wrapped(shot: Shot):
        try:
            return fn(shot)
        except StageError:
            raise
        except Exception as e:  # noqa: BLE001 - re-raised with context
            raise StageError(stage, str(e), shot.shot_id) from e

    return wrapped


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(path: Path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _read_json(path: Path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _require(path: Path, stage: str) -> Path:
    if not path.exists():
        raise StageError(stage, f"missing input artifact {path.name}; run the earlier stages first")
    return path


# --------------------------------------------------------------------------
# artifact paths


@dataclass(frozen=True)
class Artifacts:
    root: Path

    def __post_init__(self):
        object.__setattr__(self, "root", Path(self.root))

    stats = property(lambda self: self.root / "stats.txt")
    pots = property(lambda self: self.root / "pots.txt")
    ts = property(lambda self: self.root / "ts.txt")
    codebook = property(lambda self: self.root / "codebook.txt")
    codebook_ts = property(lambda self: self.root / "codebook_ts.txt")
    codewords = property(lambda self: self.root / "codewords.txt")
    intervals = property(lambda self: self.root / "intervals.txt")
    pauses = property(lambda self: self.root / "pauses.txt")
    dendrogram = property(lambda self: self.root / "dendrogram.txt")
    excluded = property(lambda self: self.root / "excluded.txt")
    metrics = property(lambda self: self.root / "metrics.csv")
    summary = property(lambda self: self.root / "summary.json")
    plot = property(lambda self: self.root / "metrics.svg")
    gallery = property(lambda self: self.root / "gallery.json")
    gallery_svg = property(lambda self: self.root / "gallery.svg")
    manifest = property(lambda self: self.root / "manifest.json")

    def clusters(self, k: int) -> Path:
        return self.root / "clusters" / f"k{k:03d}.txt"


# --------------------------------------------------------------------------
# stages


def stage_stats(shots: list[Shot], cfg: PipelineConfig, art: Artifacts, threads: int = 1) -> None:
    fn = _per_shot("stats", lambda s: (s.shot_id, compute_frame_motion_stats(s, cfg.n)))
    write_stats(art.stats, _map(fn, shots, threads))


def stage_pot(shots: list[Shot], cfg: PipelineConfig, art: Artifacts, threads: int = 1) -> None:
    sel = cfg.selection()

    def one(shot):
        return extract_pots(shot, compute_frame_motion_stats(shot, cfg.n), sel)

    pots = _map(_per_shot("pot", one), shots, threads)
    write_pots(art.pots, (p for block in pots for p in block))
    if "ts" in cfg.channels:
        ts = _map(_per_shot("pot", lambda s: (s.shot_id, extract_ts(s, cfg.n))), shots, threads)
        with open(art.ts, "w", encoding="utf-8") as fh:
            for shot_id, rows in ts:
                for f, tid, vec in rows:
                    fh.write(f"ts {shot_id} {f} {tid} " + " ".join(repr(float(v)) for v in vec) + "\n")


def read_ts(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(shot_ids, start_frames, vectors)`` from a TS dump."""
    shots, frames, vecs = [], [], []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            tok = line.split()
            if not tok:
                continue
            shots.append(int(tok[1]))
            frames.append(int(tok[2]))
            vecs.append([float(v) for v in tok[4:]])
    return np.array(shots, dtype=np.int64), np.array(frames, dtype=np.int64), np.array(vecs)


def _load_pot_arrays(art: Artifacts) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    table = read_pot_table(_require(art.pots, "codebook"))
    return table.shot_id, table.start_frame, table.vectors


def stage_codebook(cfg: PipelineConfig, art: Artifacts, threads: int = 1) -> None:
    ex = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        jobs = [("pot", art.codebook, cfg.K, lambda: _load_pot_arrays(art)[2])]
        if "ts" in cfg.channels:
            jobs.append(("ts", art.codebook_ts, cfg.K_ts, lambda: read_ts(_require(art.ts, "codebook"))[2]))
        for name, path, K, load in jobs:
            X = load()
            if len(X) == 0:
                raise StageError("codebook", f"no {name} descriptors to cluster")
            try:
                X = sample_rows([X], cfg.max_sample, cfg.seed)
                cb = build_codebook(
                    X, K, cfg.restarts, cfg.seed, cfg.init, cfg.standardize,
                    max_sample=None, executor=ex,
                )
            except ValueError as e:
                raise StageError("codebook", f"{name} channel: {e}") from e
            write_codebook(path, cb)
            log.info("%s codebook: K=%d energy=%.6g", name, K, cb.energy)
    finally:
        if ex is not None:
            ex.shutdown()


def _codebook_size(path) -> int:
    with open(path, encoding="utf-8") as fh:
        return int(fh.readline().split()[1])


def _codeword_table(
    art: Artifacts, stage: str, channels: Sequence[str] = ("pot", "ts")
) -> dict[str, tuple[np.ndarray, np.ndarray, np.ndarray, int]]:
    """Per channel: shot ids, start frames, codewords and K."""
    out = {}
    if "pot" in channels:
        shots, frames, vecs = _load_pot_arrays(art)
        cb = read_codebook(_require(art.codebook, stage))
        cw = quantize_many(vecs, cb) if len(vecs) else np.zeros(0, dtype=np.int64)
        out["pot"] = (shots, frames, cw, cb.K)
    if "ts" in channels and art.codebook_ts.exists() and art.ts.exists():
        s2, f2, v2 = read_ts(art.ts)
        cb2 = read_codebook(art.codebook_ts)
        out["ts"] = (s2, f2, quantize_many(v2, cb2) if len(v2) else np.zeros(0, dtype=np.int64), cb2.K)
    return out


def stage_partition(shots: list[Shot], cfg: PipelineConfig, art: Artifacts, threads: int = 1) -> None:
    table = _codeword_table(art, "partition", channels=("pot",))
    shot_ids, frames, cw, K = table["pot"]
    with open(art.codewords, "w", encoding="utf-8") as fh:
        for s, f, c in zip(shot_ids, frames, cw):
            fh.write(f"codeword {s} {f} {c}\n")
    pcfg = cfg.periodicity()
    span = cfg.n if cfg.span_indexing else None

    def one(shot):
        sel = shot_ids == shot.shot_id
        stats = compute_frame_motion_stats(shot, cfg.n)
        theta_F = cfg.theta_F if cfg.pauses else -1.0
        return partition_shot(
            shot.shot_id, shot.num_frames, stats, frames[sel], cw[sel], K,
            theta_F, pcfg, span, cfg.periodic,
        )

    results = _map(_per_shot("partition", one), shots, threads)
    write_intervals(art.intervals, (iv for ivs, _ in results for iv in ivs))
    with open(art.pauses, "w", encoding="utf-8") as fh:
        for shot, (_, pauses) in zip(shots, results):
            for a, b in pauses:
                fh.write(f"pause {shot.shot_id} {a} {b}\n")


def interval_histograms(
    intervals: Sequence[Interval], shot_ids: np.ndarray, frames: np.ndarray, cw: np.ndarray, K: int
) -> tuple[np.ndarray, np.ndarray]:
    """BoW of the PoTs starting inside each interval, and an emptiness mask."""
    H = np.zeros((len(intervals), K))
    empty = np.zeros(len(intervals), dtype=bool)
    order = np.lexsort((frames, shot_ids))
    shot_ids, frames, cw = shot_ids[order], frames[order], cw[order]
    for i, iv in enumerate(intervals):
        lo = np.searchsorted(shot_ids, iv.shot_id, "left")
        hi = np.searchsorted(shot_ids, iv.shot_id, "right")
        f = frames[lo:hi]
        a = lo + np.searchsorted(f, iv.start_frame, "left")
        b = lo + np.searchsorted(f, iv.end_frame, "left")
        h = bow(cw[a:b], K)
        H[i] = h.weights
        empty[i] = h.empty
    return H, empty


def read_codewords(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    data = np.loadtxt(path, dtype=np.int64, usecols=(1, 2, 3), ndmin=2)
    return data[:, 0], data[:, 1], data[:, 2]


def stage_cluster(cfg: PipelineConfig, art: Artifacts) -> None:
    intervals = read_intervals(_require(art.intervals, "cluster"))
    s, f, c = read_codewords(_require(art.codewords, "cluster"))
    table = {"pot": (s, f, c, _codebook_size(_require(art.codebook, "cluster")))}
    if "ts" in cfg.channels:
        table.update(_codeword_table(art, "cluster", channels=("ts",)))
    channels, empty = {}, np.zeros(len(intervals), dtype=bool)
    for name in cfg.channels:
        if name not in table:
            raise StageError("cluster", f"channel {name!r} has no codebook")
        s, f, c, K = table[name]
        H, e = interval_histograms(intervals, s, f, c, K)
        channels[name] = H
        empty |= e
    keep = np.flatnonzero(~empty)
    with open(art.excluded, "w", encoding="utf-8") as fh:
        for i in np.flatnonzero(empty):
            fh.write(f"excluded {i}\n")
    if len(keep) == 0:
        raise StageError("cluster", "every interval has an empty histogram")
    kept = {name: H[keep] for name, H in channels.items()}
    if len(cfg.channels) == 1:
        D = cl.distance_matrix(kept)
    else:
        try:
            dcfg = cl.DistanceConfig(cfg.channels, cl.channel_norms(kept))
        except cl.ChannelError as e:
            raise StageError("cluster", str(e)) from e
        D = cl.distance_matrix(kept, dcfg)
    dendro = cl.linkage(D)
    cl.write_dendrogram(art.dendrogram, dendro)
    art.clusters(0).parent.mkdir(exist_ok=True)
    for k in cfg.k_values():
        if k > len(keep):
            raise StageError("cluster", f"k={k} exceeds the {len(keep)} clusterable intervals")
        cl.write_assignments(art.clusters(k), dendro.cut(k), keep)


def stage_eval(shots: list[Shot], cfg: PipelineConfig, art: Artifacts) -> None:
    labels = {s.shot_id: s.frame_labels for s in shots}
    missing = [sid for sid, lab in labels.items() if lab is None]
    if missing:
        raise StageError("eval", "frame labels are required for evaluation", missing[0])
    intervals = read_intervals(_require(art.intervals, "eval"))
    rows, per_behavior = [], {}
    for k in cfg.k_values():
        assign = cl.read_assignments(_require(art.clusters(k), "eval"))
        idx = sorted(assign)
        ivs = [intervals[i] for i in idx]
        lab = ev.label_intervals(ivs, [assign[i] for i in idx], labels)
        truth = [x.label for x in lab]
        pred = [x.cluster for x in lab]
        rows.append(
            ev.MetricsRow(k, ev.purity(pred, truth), ev.ari(pred, truth), len(ivs),
                          ev.mean_uniformity(ivs, labels))
        )
        if k == cfg.k:
            per_behavior = ev.count_intervals_per_behavior(lab)
    ev.write_metrics(art.metrics, rows)
    whole = [Interval(s.shot_id, 0, s.num_frames) for s in shots]
    summary = {
        "k": cfg.k,
        "intervals": len(intervals),
        "uniformity_partitioned": ev.mean_uniformity(intervals, labels),
        "uniformity_whole_shot": ev.mean_uniformity(whole, labels),
        "shots_per_behavior": dict(sorted(per_behavior.items())),
    }
    _write_json(art.summary, summary)


# --------------------------------------------------------------------------
# report


def _polyline(xs, ys, x0, y0, w, h, xlo, xhi) -> str:
    span = (xhi - xlo) or 1
    pts = []
    for x, y in zip(xs, ys):
        px = x0 + (0.5 * w if xhi == xlo else (x - xlo) / span * w)
        py = y0 + h - max(min(y, 1.0), -1.0) * h
        pts.append(f"{px:.2f},{py:.2f}")
    return " ".join(pts)


def metrics_svg(rows: Sequence[ev.MetricsRow]) -> str:
    """Purity and ARI against the number of clusters."""
    if not rows:
        raise ValueError("no metrics to plot")
    W, H, m = 480, 300, 40
    ks = [r.k for r in rows]
    lo, hi = min(ks), max(ks)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect x="{m}" y="{m}" width="{W - 2 * m}" height="{H - 2 * m}" fill="none" stroke="#888"/>',
    ]
    for name, colour, ys in (
        ("purity", "#1f77b4", [r.purity for r in rows]),
        ("ari", "#d62728", [r.ari for r in rows]),
    ):
        pts = _polyline(ks, ys, m, m, W - 2 * m, H - 2 * m, lo, hi)
        out.append(f'<polyline class="{name}" fill="none" stroke="{colour}" points="{pts}"/>')
        for p in pts.split():
            x, y = p.split(",")
            out.append(f'<circle class="{name}" cx="{x}" cy="{y}" r="2" fill="{colour}"/>')
    out.append(f'<text x="{m}" y="{H - 10}" font-size="12">k = {lo}..{hi}</text>')
    out.append(f'<text x="{W - m - 120}" y="{m - 10}" font-size="12" fill="#1f77b4">purity</text>')
    out.append(f'<text x="{W - m - 60}" y="{m - 10}" font-size="12" fill="#d62728">ARI</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def cluster_gallery(
    k: int, assign: dict[int, int], intervals: Sequence[Interval], shots: dict[int, Shot],
    pots: dict[tuple[int, int], list[tuple[int, int, int]]], per_interval: int = 3,
) -> dict:
    """Members of every cluster ``0..k-1`` with anchor/swing coordinates to overlay.

    ``pots`` maps ``(shot, start_frame)`` to ``(anchor, swing, window)`` triples.
    """
    clusters = {c: [] for c in range(k)}
    for i in sorted(assign):
        iv = intervals[i]
        overlay = []
        for f in range(iv.start_frame, iv.end_frame):
            for anchor, swing, n in pots.get((iv.shot_id, f), []):
                if len(overlay) >= per_interval:
                    break
                shot = shots[iv.shot_id]
                a = shot.trajectory(anchor).window(f, n)
                s = shot.trajectory(swing).window(f, n)
                overlay.append({
                    "frame": f, "anchor": anchor, "swing": swing,
                    "anchor_xy": a.tolist(), "swing_xy": s.tolist(),
                })
            if len(overlay) >= per_interval:
                break
        clusters[assign[i]].append({
            "interval": i, "shot": iv.shot_id, "start": iv.start_frame, "end": iv.end_frame,
            "origin": iv.origin, "pots": overlay,
        })
    return {"k": k, "clusters": [{"cluster": c, "size": len(m), "members": m} for c, m in clusters.items()]}


def gallery_svg(gallery: dict, cell: int = 60, max_members: int = 12) -> str:
    rows = gallery["clusters"]
    W = cell * (max_members + 2)
    H = cell * max(len(rows), 1)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">']
    for r, row in enumerate(rows):
        y0 = r * cell
        out.append(f'<text x="4" y="{y0 + cell // 2}" font-size="11">c{row["cluster"]} ({row["size"]})</text>')
        for j, mem in enumerate(row["members"][:max_members]):
            x0 = (j + 2) * cell
            out.append(f'<rect x="{x0}" y="{y0}" width="{cell}" height="{cell}" fill="none" stroke="#ccc"/>')
            for p in mem["pots"]:
                rel = np.array(p["swing_xy"]) - np.array(p["anchor_xy"])
                ext = float(np.abs(rel).max()) or 1.0
                pts = " ".join(
                    f"{x0 + cell / 2 + 0.45 * cell * u / ext:.2f},{y0 + cell / 2 - 0.45 * cell * v / ext:.2f}"
                    for u, v in rel
                )
                out.append(f'<polyline fill="none" stroke="#333" points="{pts}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_report(root, shots: list[Shot] | None = None, k: int | None = None) -> list[Path]:
    """Write the metric plot and, when shots are given, the cluster gallery."""
    art = Artifacts(root)
    if not art.metrics.exists():
        raise StageError("report", f"missing metrics file {art.metrics}")
    rows = ev.read_metrics(art.metrics)
    art.plot.write_text(metrics_svg(rows), encoding="utf-8")
    written = [art.plot]
    if shots is not None:
        k = rows[0].k if k is None else k
        assign = cl.read_assignments(_require(art.clusters(k), "report"))
        intervals = read_intervals(_require(art.intervals, "report"))
        t = read_pot_table(_require(art.pots, "report"))
        n = (t.vectors.shape[1] - 1) // 2 + 1
        by_frame: dict[tuple[int, int], list[tuple[int, int, int]]] = {}
        for sh, f, a, sw in zip(t.shot_id.tolist(), t.start_frame.tolist(),
                                t.anchor_id.tolist(), t.swing_id.tolist()):
            by_frame.setdefault((sh, f), []).append((a, sw, n))
        gal = cluster_gallery(k, assign, intervals, {s.shot_id: s for s in shots}, by_frame)
        _write_json(art.gallery, gal)
        art.gallery_svg.write_text(gallery_svg(gal), encoding="utf-8")
        written += [art.gallery, art.gallery_svg]
    return written


# --------------------------------------------------------------------------
# orchestration


def write_manifest(art: Artifacts, cfg: PipelineConfig, dataset: Path, stages: Sequence[str]) -> None:
    files = sorted(
        p for p in art.root.rglob("*") if p.is_file() and p.name != art.manifest.name
    )
    _write_json(art.manifest, {
        "config": cfg.to_dict(),
        "config_sha256": cfg.digest(),
        "dataset_sha256": _sha256(dataset),
        "seeds": {"codebook": cfg.seed},
        "stages": list(stages),
        "artifacts": {str(p.relative_to(art.root)): _sha256(p) for p in files},
    })


def run_stage(stage: str, shots: list[Shot], cfg: PipelineConfig, art: Artifacts, threads: int = 1) -> None:
    if stage == "stats":
        stage_stats(shots, cfg, art, threads)
    elif stage == "pot":
        stage_pot(shots, cfg, art, threads)
    elif stage == "codebook":
        stage_codebook(cfg, art, threads)
    elif stage == "partition":
        stage_partition(shots, cfg, art, threads)
    elif stage == "cluster":
        stage_cluster(cfg, art)
    elif stage == "eval":
        stage_eval(shots, cfg, art)
    elif stage == "report":
        render_report(art.root, shots, cfg.k)
    else:
        raise ValueError(f"unknown stage {stage!r}; expected one of {STAGES}")


def run_pipeline(
    cfg: PipelineConfig, dataset, out_dir, until: str = "report", threads: int = 1
) -> Artifacts:
    """Run stages up to and including ``until``; returns the artifact paths."""
    if until not in STAGES:
        raise ValueError(f"unknown stage {until!r}; expected one of {STAGES}")
    dataset = Path(dataset)
    art = Artifacts(out_dir)
    art.root.mkdir(parents=True, exist_ok=True)
    shots = load_dataset(dataset)
    if not shots:
        raise StageError("stats", "dataset holds no shots")
    done = []
    for stage in STAGES[: STAGES.index(until) + 1]:
        log.info("stage %s", stage)
        run_stage(stage, shots, cfg, art, threads)
        done.append(stage)
        write_manifest(art, cfg, dataset, done)
    return art


def default_threads() -> int:
    return max(1, min(8, os.cpu_count() or 1))
