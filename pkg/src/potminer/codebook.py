"""k-means codebooks and bag-of-words histograms."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from numba import njit

MAX_ITER = 100
# finite stand-in for "no bound yet"; the assignment kernel is compiled with
# fastmath, which assumes no infinities or NaNs
FAR = 1e300
# centroids per bound group in the assignment step
GROUP_SIZE = 40
DEFAULT_SAMPLE = 1_000_000


class CodebookError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Codebook:
    centroids: np.ndarray  # (K, dim), in the (optionally standardized) space
    descriptor_dim: int
    energy: float
    seed: int
    # per-component standardization applied before distance computations
    shift: np.ndarray | None = None
    scale: np.ndarray | None = None
    restart_energies: tuple[float, ...] = ()
    # per-iteration energies of every restart, in restart order
    restart_traces: tuple[tuple[float, ...], ...] = ()

    @property
    def K(self) -> int:
        return len(self.centroids)

    def transform(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if self.shift is not None:
            x = (x - self.shift) / self.scale
        return x

    def __eq__(self, other):
        if not isinstance(other, Codebook):
            return NotImplemented

        def same(a, b):
            return (a is None and b is None) or (
                a is not None and b is not None and np.array_equal(a, b)
            )

        return (
            np.array_equal(self.centroids, other.centroids)
            and self.descriptor_dim == other.descriptor_dim
            and self.energy == other.energy
            and self.seed == other.seed
            and same(self.shift, other.shift)
            and same(self.scale, other.scale)
        )

    __hash__ = None


@dataclass
class KMeansRun:
    centroids: np.ndarray
    labels: np.ndarray
    energy: float
    energy_trace: list[float] = field(default_factory=list)
    iterations: int = 0


# --------------------------------------------------------------------------
# k-means


def _sq_dists(X: np.ndarray, C: np.ndarray, xx: np.ndarray, cc: np.ndarray) -> np.ndarray:
    d = xx[:, None] - 2.0 * (X @ C.T) + cc[None, :]
    np.maximum(d, 0.0, out=d)
    return d


@njit(cache=True, nogil=True)
def _row_bounds(d, group, G):
    # nearest column (lowest index on ties) and per-group minimum of the others
    m = d.shape[0]
    idx = np.empty(m, dtype=np.int64)
    best = np.empty(m)
    low = np.full((m, G), FAR)
    for r in range(m):
        b = 0
        for j in range(1, d.shape[1]):
            if d[r, j] < d[r, b]:
                b = j
        idx[r] = b
        best[r] = np.sqrt(d[r, b])
        for j in range(d.shape[1]):
            if j != b and d[r, j] < low[r, group[j]]:
                low[r, group[j]] = d[r, j]
    return idx, best, np.sqrt(low)


def _initial_bounds(X, C, xx, cc, group, G, chunk=4096):
    """Nearest centroid (lowest index on ties), its distance, and per-group
    lower bounds on the distance to every other centroid."""
    n = len(X)
    a = np.empty(n, dtype=np.int64)
    upper = np.empty(n)
    lower = np.empty((n, G))
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        a[lo:hi], upper[lo:hi], lower[lo:hi] = _row_bounds(
            _sq_dists(X[lo:hi], C, xx[lo:hi], cc), group, G
        )
    return a, upper, lower


def _init_random(X, K, rng):
    return X[np.sort(rng.choice(len(X), size=K, replace=False))].copy()


def _init_plusplus(X, K, rng):
    n = len(X)
    idx = [int(rng.integers(n))]
    closest = ((X - X[idx[0]]) ** 2).sum(axis=1)
    for _ in range(1, K):
        total = closest.sum()
        if total <= 0:
            rest = np.setdiff1d(np.arange(n), idx)
            idx.append(int(rng.choice(rest)))
        else:
            idx.append(int(rng.choice(n, p=closest / total)))
        closest = np.minimum(closest, ((X - X[idx[-1]]) ** 2).sum(axis=1))
    return X[idx].copy()


def _group_centroids(C: np.ndarray, G: int, iters: int = 5) -> np.ndarray:
    """Group label per centroid from a short deterministic k-means over centroids."""
    K = len(C)
    if G <= 1:
        return np.zeros(K, dtype=np.int64)
    M = C[np.linspace(0, K - 1, G).astype(np.int64)].copy()
    cc = (C * C).sum(axis=1)
    g = np.zeros(K, dtype=np.int64)
    for _ in range(iters):
        g = np.argmin(_sq_dists(C, M, cc, (M * M).sum(axis=1)), axis=1)
        for j in range(G):
            members = g == j
            if members.any():
                M[j] = C[members].mean(axis=0)
    return g


@njit(cache=True, nogil=True)
def _cluster_sums(X, a, K):
    out = np.zeros((K, X.shape[1]))
    for i in range(X.shape[0]):
        for k in range(X.shape[1]):
            out[a[i], k] += X[i, k]
    return out


@njit(cache=True, nogil=True)
def _point_sq(X, C, a):
    # squared distance of every point to its assigned centroid
    out = np.empty(X.shape[0])
    for i in range(X.shape[0]):
        s = 0.0
        for k in range(X.shape[1]):
            t = X[i, k] - C[a[i], k]
            s += t * t
        out[i] = s
    return out


@njit(cache=True, nogil=True, fastmath=True)
def _assign(X, C, a, upper, lower, group, gperm, gstart, drift, gdrift, slack):
    """One bounded assignment step; returns the number of changed points.

    ``upper`` bounds the distance to the assigned centroid and ``lower[i, g]``
    bounds the distance to every other centroid of group ``g``. Both are first
    moved by the centroid drifts of the previous update. Groups whose bound
    cannot beat the current best are skipped; the rest are scanned exactly.
    """
    n, D = X.shape
    G = gstart.shape[0] - 1
    m1 = np.empty(G)
    m2 = np.empty(G)
    i1 = np.empty(G, dtype=np.int64)
    scanned = np.zeros(G, dtype=np.bool_)
    changed = 0
    for i in range(n):
        ca = a[i]
        ub = upper[i] + drift[ca]
        glb = FAR
        for g in range(G):
            lower[i, g] -= gdrift[g]
            if lower[i, g] < glb:
                glb = lower[i, g]
        if ub <= glb - slack:
            upper[i] = ub
            continue
        u0 = 0.0
        for k in range(D):
            t = X[i, k] - C[ca, k]
            u0 += t * t
        u0 = np.sqrt(u0)
        upper[i] = u0
        if u0 <= glb - slack:
            continue
        best = u0
        bj = ca
        xi = X[i]
        u0sq = u0 * u0
        for g in range(G):
            scanned[g] = False
            if lower[i, g] > best + slack and g != group[ca]:
                continue
            scanned[g] = True
            # squared distances inside the group; one sqrt per group
            d1 = FAR
            d2 = FAR
            j1 = -1
            for r in range(gstart[g], gstart[g + 1]):
                j = gperm[r]
                if j == ca:
                    dj = u0sq
                else:
                    dj = 0.0
                    for k in range(D):
                        t = xi[k] - C[j, k]
                        dj += t * t
                if dj < d1 or (dj == d1 and j < j1):
                    d2 = d1
                    d1 = dj
                    j1 = j
                elif dj < d2:
                    d2 = dj
            d1 = np.sqrt(d1)
            m1[g] = d1
            m2[g] = np.sqrt(d2)
            i1[g] = j1
            if d1 < best or (d1 == best and j1 < bj):
                best = d1
                bj = j1
        for g in range(G):
            if scanned[g]:
                lower[i, g] = m2[g] if i1[g] == bj else m1[g]
        if bj != ca:
            changed += 1
        a[i] = bj
        upper[i] = best
    return changed


def lloyd(
    X: np.ndarray,
    init: np.ndarray,
    max_iter: int = MAX_ITER,
) -> KMeansRun:
    """Lloyd iterations; group distance bounds skip centroids that provably lose.

    Stops when no assignment changes or after ``max_iter`` iterations. The
    energy (sum of squared distances) is recorded after every assignment
    step and checked to be non-increasing.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    C = np.array(init, dtype=np.float64)
    if not (np.isfinite(X).all() and np.isfinite(C).all()):
        raise ValueError("k-means input contains NaN or infinite values")
    n, K = len(X), len(C)
    xx = (X * X).sum(axis=1)
    slack = 1e-9 * (1.0 + (float(np.sqrt(xx.max())) if n else 0.0))
    group = _group_centroids(C, max(1, K // GROUP_SIZE))
    gperm = np.argsort(group, kind="stable")
    gstart = np.searchsorted(group[gperm], np.arange(group.max() + 2))

    trace: list[float] = []
    it = 0
    drift = np.zeros(K)
    gdrift = np.zeros(len(gstart) - 1)
    for it in range(1, max_iter + 1):
        if it == 1:
            a, upper, lower = _initial_bounds(X, C, xx, (C * C).sum(axis=1), group, len(gstart) - 1)
            changed = n
        else:
            changed = _assign(X, C, a, upper, lower, group, gperm, gstart, drift, gdrift, slack)

        point_sq = _point_sq(X, C, a)
        energy = float(point_sq.sum())
        if trace and energy > trace[-1] * (1 + 1e-12) + 1e-12:
            raise AssertionError(
                f"k-means energy increased at iteration {it}: {trace[-1]!r} -> {energy!r}"
            )
        trace.append(energy)
        if changed == 0 or it == max_iter:
            break

        counts = np.bincount(a, minlength=K)
        sums = _cluster_sums(X, a, K)
        newC = C.copy()
        nz = counts > 0
        newC[nz] = sums[nz] / counts[nz, None]
        if not nz.all():
            # re-seed each empty cluster with the point farthest from its centroid
            far = np.argsort(-point_sq, kind="stable")
            for used, j in enumerate(np.flatnonzero(~nz)):
                newC[j] = X[far[used]]
        drift = np.sqrt(((newC - C) ** 2).sum(axis=1))
        gdrift = np.maximum.reduceat(drift[gperm], gstart[:-1])
        C = newC
    return KMeansRun(C, a, trace[-1], trace, it)


def build_codebook(
    descriptors: np.ndarray,
    K: int,
    restarts: int = 8,
    seed: int = 0,
    init: str = "random",
    standardize: bool = False,
    max_iter: int = MAX_ITER,
    max_sample: int | None = DEFAULT_SAMPLE,
    executor=None,
) -> Codebook:
    """Run k-means ``restarts`` times and keep the lowest-energy result.

    ``executor`` (a ``concurrent.futures`` executor) runs restarts in parallel;
    results do not depend on it.
    """
    X = np.asarray(descriptors, dtype=np.float64)
    if X.ndim != 2:
        raise CodebookError("descriptors must be a 2-D array")
    if not np.isfinite(X).all():
        raise CodebookError("descriptors contain NaN or infinite values")
    if K < 1:
        raise CodebookError(f"K must be >= 1, got {K}")
    if restarts < 1:
        raise CodebookError(f"restarts must be >= 1, got {restarts}")
    ss = np.random.SeedSequence(seed)
    sample_ss, *run_ss = ss.spawn(restarts + 1)
    if max_sample is not None and len(X) > max_sample:
        pick = np.random.default_rng(sample_ss).choice(len(X), size=max_sample, replace=False)
        X = X[np.sort(pick)]
    if len(X) < K:
        raise CodebookError(
            f"only {len(X)} descriptors for K={K}; use K <= {len(X)}"
        )
    shift = scale = None
    if standardize:
        shift = X.mean(axis=0)
        scale = X.std(axis=0)
        scale[scale == 0] = 1.0
        X = (X - shift) / scale

    if init == "random":
        init_fn = _init_random
    elif init in ("kmeans++", "k-means++"):
        init_fn = _init_plusplus
    else:
        raise CodebookError(f"unknown init {init!r}")

    def one(child):
        rng = np.random.default_rng(child)
        return lloyd(X, init_fn(X, K, rng), max_iter=max_iter)

    if executor is None:
        runs = [one(c) for c in run_ss]
    else:
        runs = list(executor.map(one, run_ss))
    energies = [r.energy for r in runs]
    best = runs[int(np.argmin(energies))]
    cents = best.centroids
    cents.setflags(write=False)
    return Codebook(
        cents, X.shape[1], best.energy, int(seed), shift, scale, tuple(energies),
        tuple(tuple(r.energy_trace) for r in runs),
    )


# --------------------------------------------------------------------------
# quantization and histograms


def quantize_many(descriptors: np.ndarray, codebook: Codebook) -> np.ndarray:
    X = np.atleast_2d(np.asarray(descriptors, dtype=np.float64))
    if X.shape[1] != codebook.descriptor_dim:
        raise CodebookError(
            f"descriptor dimension {X.shape[1]} != codebook dimension {codebook.descriptor_dim}"
        )
    if len(X) == 0:
        return np.zeros(0, dtype=np.int64)
    X = codebook.transform(X)
    C = codebook.centroids
    cc = (C * C).sum(axis=1)
    out = np.empty(len(X), dtype=np.int64)
    for lo in range(0, len(X), 4096):
        xb = X[lo : lo + 4096]
        xx = (xb * xb).sum(axis=1)
        d = _sq_dists(xb, C, xx, cc)
        best = d.min(axis=1)
        # expanded distances carry rounding error; settle near-ties exactly
        tol = 1e-9 * (xx + cc.max() + 1.0)
        near = d <= (best + tol)[:, None]
        idx = np.argmax(near, axis=1)
        for r in np.flatnonzero(near.sum(axis=1) > 1):
            js = np.flatnonzero(near[r])
            exact = ((xb[r] - C[js]) ** 2).sum(axis=1)
            idx[r] = js[int(np.argmin(exact))]
        out[lo : lo + 4096] = idx
    return out


def quantize(descriptor: np.ndarray, codebook: Codebook) -> int:
    """Index of the nearest centroid; the lowest index wins ties."""
    d = np.asarray(descriptor, dtype=np.float64).ravel()
    if d.shape[0] != codebook.descriptor_dim:
        raise CodebookError(
            f"descriptor dimension {d.shape[0]} != codebook dimension {codebook.descriptor_dim}"
        )
    return int(quantize_many(d[None], codebook)[0])


@dataclass(frozen=True, eq=False)
class BoWHistogram:
    weights: np.ndarray
    empty: bool = False

    @property
    def K(self) -> int:
        return len(self.weights)


def bow(codewords: Iterable[int], K: int) -> BoWHistogram:
    """L1-normalized codeword counts; all-zero and flagged for no input."""
    cw = np.fromiter((int(c) for c in codewords), dtype=np.int64)
    if len(cw) and (cw.min() < 0 or cw.max() >= K):
        raise CodebookError(f"codeword out of range [0, {K})")
    counts = np.bincount(cw, minlength=K).astype(np.float64)
    if len(cw) == 0:
        w = counts
        w.setflags(write=False)
        return BoWHistogram(w, True)
    w = counts / len(cw)
    w.setflags(write=False)
    return BoWHistogram(w, False)


# --------------------------------------------------------------------------
# serialization


def write_codebook(path, cb: Codebook) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"codebook {cb.K} {cb.descriptor_dim} {cb.seed} {cb.energy!r}\n")
        if cb.shift is not None:
            fh.write("shift " + " ".join(repr(float(v)) for v in cb.shift) + "\n")
            fh.write("scale " + " ".join(repr(float(v)) for v in cb.scale) + "\n")
        for row in cb.centroids:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def read_codebook(path) -> Codebook:
    with open(path, encoding="utf-8") as fh:
        lines = [ln.split() for ln in fh if ln.strip()]
    if not lines or lines[0][0] != "codebook" or len(lines[0]) != 5:
        raise CodebookError(f"{path}: missing 'codebook <K> <dim> <seed> <energy>' header")
    K, dim, seed = (int(v) for v in lines[0][1:4])
    energy = float(lines[0][4])
    shift = scale = None
    body = lines[1:]
    if body and body[0][0] == "shift":
        shift = np.array([float(v) for v in body[0][1:]])
        scale = np.array([float(v) for v in body[1][1:]])
        body = body[2:]
    cents = np.array([[float(v) for v in row] for row in body], dtype=np.float64)
    if cents.shape != (K, dim):
        raise CodebookError(f"{path}: expected {K}x{dim} centroids, got {cents.shape}")
    cents.setflags(write=False)
    return Codebook(cents, dim, energy, seed, shift, scale)


def sample_rows(arrays: Sequence[np.ndarray], max_sample: int, seed: int) -> np.ndarray:
    """Stack descriptor blocks and draw up to ``max_sample`` rows uniformly."""
    X = np.concatenate([np.atleast_2d(a) for a in arrays if len(a)], axis=0)
    if len(X) <= max_sample:
        return X
    rng = np.random.default_rng(seed)
    return X[np.sort(rng.choice(len(X), size=max_sample, replace=False))]
