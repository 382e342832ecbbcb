"""Interval dissimilarities and complete-linkage agglomerative clustering."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .codebook import BoWHistogram

SYMMETRY_TOL = 1e-9
# allowed deviation of a histogram's total mass from 1
NORM_TOL = 1e-9


class ChannelError(ValueError):
    """Channel sets disagree or a channel has no spread to normalize by."""


def _weights(b) -> np.ndarray:
    if isinstance(b, BoWHistogram):
        if b.empty:
            raise ValueError("empty BoW histogram cannot be compared; drop the interval first")
        return b.weights
    return np.asarray(b, dtype=np.float64)


def _pair(b_u, b_v) -> tuple[np.ndarray, np.ndarray]:
    u, v = _weights(b_u), _weights(b_v)
    if u.shape != v.shape:
        raise ValueError(f"histogram lengths differ: {u.shape} vs {v.shape}")
    return u, v


def _check_normalized(H: np.ndarray) -> None:
    sums = np.atleast_1d(H.sum(axis=-1))
    if len(sums) and np.max(np.abs(sums - 1.0)) > NORM_TOL:
        raise ValueError("histograms must be L1-normalized")


def histogram_intersection(b_u, b_v) -> float:
    u, v = _pair(b_u, b_v)
    return float(np.minimum(u, v).sum())


def dissimilarity(b_u, b_v) -> float:
    """``1 - HI`` of two L1-normalized histograms.

    Evaluated as half the L1 distance, which is the same quantity for unit-mass
    histograms and is exactly zero for identical ones.
    """
    u, v = _pair(b_u, b_v)
    _check_normalized(np.stack([u, v]))
    return 0.5 * float(np.abs(u - v).sum())


def interval_distance(b_u, b_v) -> float:
    """``-exp(-(1 - HI))``; -1 for identical histograms, -1/e for disjoint ones."""
    return -math.exp(-dissimilarity(b_u, b_v))


@dataclass(frozen=True)
class DistanceConfig:
    channels: tuple[str, ...]
    channel_norms: Mapping[str, float]

    def __post_init__(self):
        if not self.channels:
            raise ChannelError("at least one channel is required")
        for c in self.channels:
            a = self.channel_norms.get(c)
            if a is None:
                raise ChannelError(f"no normalizer for channel {c!r}")
            if not a > 0:
                raise ChannelError(f"channel {c!r} has zero mean dissimilarity")


def multichannel_distance(
    channels_u: Mapping[str, object], channels_v: Mapping[str, object], cfg: DistanceConfig
) -> float:
    """``-exp(-sum_i (1 - HI_i) / A_i)`` over the configured channels."""
    if set(channels_u) != set(channels_v) or not set(cfg.channels) <= set(channels_u):
        raise ChannelError(
            f"channel mismatch: {sorted(channels_u)} vs {sorted(channels_v)} for {list(cfg.channels)}"
        )
    total = sum(
        dissimilarity(channels_u[c], channels_v[c]) / cfg.channel_norms[c]
        for c in cfg.channels
    )
    return -math.exp(-total)


def dissimilarity_matrix(hists: np.ndarray) -> np.ndarray:
    """Pairwise ``1 - HI`` for rows of an ``(m, K)`` L1-normalized histogram array."""
    H = np.asarray(hists, dtype=np.float64)
    _check_normalized(H)
    m = len(H)
    out = np.zeros((m, m))
    for i in range(m):
        out[i, i + 1 :] = 0.5 * np.abs(H[i] - H[i + 1 :]).sum(axis=1)
    out += out.T
    return out


def channel_norms(channels: Mapping[str, np.ndarray]) -> dict[str, float]:
    """Mean ``1 - HI`` over all distinct pairs, per channel."""
    norms = {}
    for name, H in channels.items():
        D = dissimilarity_matrix(H)
        m = len(D)
        norms[name] = float(D[np.triu_indices(m, k=1)].mean()) if m > 1 else 0.0
    return norms


def distance_matrix(channels: Mapping[str, np.ndarray], cfg: DistanceConfig | None = None) -> np.ndarray:
    """Full matrix of combined interval distances.

    ``channels`` maps a channel name to an ``(m, K_c)`` array of L1-normalized
    histograms. A single channel without a config uses the unnormalized form.
    """
    if cfg is None:
        if len(channels) != 1:
            raise ChannelError("several channels need a DistanceConfig")
        (H,) = channels.values()
        return -np.exp(-dissimilarity_matrix(H))
    total = None
    for c in cfg.channels:
        part = dissimilarity_matrix(channels[c]) / cfg.channel_norms[c]
        total = part if total is None else total + part
    return -np.exp(-total)


# --------------------------------------------------------------------------
# complete linkage


@dataclass(frozen=True)
class Dendrogram:
    """Merges as ``(node_a, node_b, height, size)``; nodes >= leaf_count are merges.

    Node numbering follows the usual linkage-matrix layout: merge ``i``
    creates node ``leaf_count + i``.
    """

    merges: tuple[tuple[int, int, float, int], ...]
    leaf_count: int

    def __post_init__(self):
        if len(self.merges) != max(self.leaf_count - 1, 0):
            raise ValueError("a dendrogram needs exactly leaf_count - 1 merges")

    def heights(self) -> np.ndarray:
        return np.array([m[2] for m in self.merges])

    def cut(self, k: int) -> np.ndarray:
        """Leaf assignment for ``k`` clusters, numbered by their smallest leaf."""
        n = self.leaf_count
        if not 1 <= k <= n:
            raise ValueError(f"k must lie in [1, {n}], got {k}")
        parent = list(range(n))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        rep = list(range(n))  # node -> a leaf inside it
        for i, (a, b, _, _) in enumerate(self.merges[: n - k]):
            ra, rb = find(rep[a]), find(rep[b])
            lo, hi = min(ra, rb), max(ra, rb)
            parent[hi] = lo
            rep.append(lo)
        roots = [find(x) for x in range(n)]
        ids: dict[int, int] = {}
        for r in roots:  # roots are the smallest leaf of each cluster
            ids.setdefault(r, len(ids))
        return np.array([ids[r] for r in roots], dtype=np.int64)


def check_distance_matrix(D: np.ndarray) -> np.ndarray:
    D = np.asarray(D, dtype=np.float64)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise ValueError(f"distance matrix must be square, got {D.shape}")
    if D.size and np.max(np.abs(D - D.T)) > SYMMETRY_TOL:
        raise ValueError("distance matrix is not symmetric")
    if np.isnan(D).any():
        raise ValueError("distance matrix contains NaN")
    return D


def linkage(D: np.ndarray) -> Dendrogram:
    """Complete-linkage agglomeration.

    Active clusters live in slots numbered by leaf index; a merge of slots
    ``i < j`` keeps slot ``i``. The pair with the smallest linkage distance is
    merged, ties going to the lexicographically smallest ``(i, j)``.
    """
    D = check_distance_matrix(D)
    n = len(D)
    if np.isinf(D[~np.eye(n, dtype=bool)]).any():
        raise ValueError("distance matrix contains infinite entries")
    W = D.copy()
    # U mirrors W on the strict upper triangle of active slots, inf elsewhere
    U = np.where(np.triu(np.ones((n, n), dtype=bool), k=1), W, np.inf)
    node = list(range(n))
    size = [1] * n
    merges = []
    for step in range(n - 1):
        # row-major argmin gives the lexicographically first (i, j) among ties
        i, j = divmod(int(np.argmin(U)), n)
        h = float(W[i, j])
        a, b = node[i], node[j]
        merges.append((min(a, b), max(a, b), h, size[i] + size[j]))
        W[i, :] = np.maximum(W[i, :], W[j, :])
        W[:, i] = W[i, :]
        live = np.isfinite(U[:i, i])
        U[:i, i] = np.where(live, W[:i, i], np.inf)
        live = np.isfinite(U[i, i + 1 :])
        U[i, i + 1 :] = np.where(live, W[i, i + 1 :], np.inf)
        U[j, :] = np.inf
        U[:, j] = np.inf
        node[i] = n + step
        size[i] += size[j]
    return Dendrogram(tuple(merges), n)


def hierarchical_cluster(D: np.ndarray, k: int) -> tuple[np.ndarray, Dendrogram]:
    dendro = linkage(D)
    return dendro.cut(k), dendro


# --------------------------------------------------------------------------
# dump formats


def write_assignments(path, labels: Sequence[int], interval_index: Sequence[int] | None = None) -> None:
    idx = range(len(labels)) if interval_index is None else interval_index
    with open(path, "w", encoding="utf-8") as fh:
        for i, c in zip(idx, labels):
            fh.write(f"cluster {int(i)} {int(c)}\n")


def read_assignments(path) -> dict[int, int]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            tok = line.split()
            if not tok:
                continue
            if tok[0] != "cluster" or len(tok) != 3:
                raise ValueError(f"{path}:{lineno}: malformed cluster record")
            out[int(tok[1])] = int(tok[2])
    return out


def write_dendrogram(path, dendro: Dendrogram) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"leaves {dendro.leaf_count}\n")
        for a, b, h, _ in dendro.merges:
            fh.write(f"merge {a} {b} {float(h)!r}\n")


def read_dendrogram(path) -> Dendrogram:
    with open(path, encoding="utf-8") as fh:
        lines = [ln.split() for ln in fh if ln.strip()]
    if not lines or lines[0][0] != "leaves":
        raise ValueError(f"{path}: missing leaves header")
    n = int(lines[0][1])
    sizes = [1] * n
    merges = []
    for tok in lines[1:]:
        if tok[0] != "merge" or len(tok) != 4:
            raise ValueError(f"{path}: malformed merge record {' '.join(tok)!r}")
        a, b, h = int(tok[1]), int(tok[2]), float(tok[3])
        s = sizes[a] + sizes[b]
        sizes.append(s)
        merges.append((a, b, h, s))
    return Dendrogram(tuple(merges), n)
