"""Slow, obviously-correct reference implementations used as test oracles."""

from itertools import combinations

import numpy as np


def pair_counts(pred, truth):
    """Counts of item pairs (together in both, pred only, truth only, neither)."""
    a = b = c = d = 0
    for i, j in combinations(range(len(pred)), 2):
        sp = pred[i] == pred[j]
        st = truth[i] == truth[j]
        if sp and st:
            a += 1
        elif sp:
            b += 1
        elif st:
            c += 1
        else:
            d += 1
    return a, b, c, d


def ari_by_pairs(pred, truth):
    """Adjusted Rand Index from explicit pair enumeration."""
    a, b, c, d = pair_counts(pred, truth)
    den = (a + b) * (b + d) + (a + c) * (c + d)
    if den == 0:
        return 0.0
    return 2.0 * (a * d - b * c) / den


def purity_by_hand(pred, truth):
    total = 0
    for cl in set(pred):
        members = [t for p, t in zip(pred, truth) if p == cl]
        total += max(members.count(x) for x in set(members))
    return total / len(pred)


def naive_complete_linkage(D):
    """Complete linkage by recomputing every cluster distance at every step.

    Returns merges ``(slot_i, slot_j, height)`` in merge order and the member
    lists after each merge. Slots are leaf indices; a merge keeps the smaller
    slot and the lexicographically first pair wins ties.
    """
    D = np.asarray(D, dtype=float)
    n = len(D)
    clusters = {i: [i] for i in range(n)}
    merges, states = [], []
    for _ in range(n - 1):
        best = None
        slots = sorted(clusters)
        for i, j in combinations(slots, 2):
            h = max(D[a, b] for a in clusters[i] for b in clusters[j])
            if best is None or h < best[2]:
                best = (i, j, h)
        i, j, h = best
        clusters[i] = clusters[i] + clusters.pop(j)
        merges.append(best)
        states.append({k: sorted(v) for k, v in clusters.items()})
    return merges, states


def naive_cut(D, k):
    """Cluster label per leaf for ``k`` clusters, numbered by smallest leaf."""
    n = len(D)
    if k == n:
        return list(range(n))
    _, states = naive_complete_linkage(D)
    groups = sorted(states[n - k - 1].values(), key=min)
    labels = [0] * n
    for g, members in enumerate(groups):
        for x in members:
            labels[x] = g
    return labels


def naive_cuts(D):
    """Labels for every cluster count ``k`` from one naive agglomeration."""
    n = len(D)
    _, states = naive_complete_linkage(D)
    out = {n: list(range(n))}
    for step, clusters in enumerate(states):
        labels = [0] * n
        for g, members in enumerate(sorted(clusters.values(), key=min)):
            for x in members:
                labels[x] = g
        out[n - step - 1] = labels
    return out
