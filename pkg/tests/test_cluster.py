import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from oracles import naive_complete_linkage, naive_cut

from potminer.cluster import (
    ChannelError,
    Dendrogram,
    DistanceConfig,
    channel_norms,
    dissimilarity,
    dissimilarity_matrix,
    distance_matrix,
    hierarchical_cluster,
    histogram_intersection,
    interval_distance,
    linkage,
    multichannel_distance,
    read_assignments,
    read_dendrogram,
    write_assignments,
    write_dendrogram,
)
from potminer.codebook import bow


def random_hists(rng, m, K):
    H = rng.random((m, K)) * (rng.random((m, K)) < 0.5)
    H[:, 0] += 1e-3
    return H / H.sum(axis=1, keepdims=True)


def random_distances(rng, n, ties=False):
    if ties:
        A = rng.integers(0, 4, size=(n, n)).astype(float)
    else:
        A = rng.random((n, n))
    D = np.triu(A, 1)
    return D + D.T


# --------------------------------------------------------------------------
# distances


def test_identical_histograms():
    b = bow([0, 1, 1, 3], 4)
    assert interval_distance(b, b) == -1.0


def test_disjoint_histograms():
    assert interval_distance(bow([0, 1], 4), bow([2, 3], 4)) == pytest.approx(-math.exp(-1), abs=1e-12)


def test_half_overlap():
    # HI = 0.5
    d = interval_distance(bow([0, 1], 4), bow([1, 2], 4))
    assert d == pytest.approx(-0.6065306597126334, abs=1e-12)


def test_empty_histogram_is_rejected():
    with pytest.raises(ValueError):
        interval_distance(bow([], 3), bow([1], 3))


def test_length_mismatch():
    with pytest.raises(ValueError):
        histogram_intersection(np.ones(3) / 3, np.ones(4) / 4)


def test_identical_histograms_have_zero_dissimilarity():
    rng = np.random.default_rng(9)
    for h in random_hists(rng, 50, 7):
        assert dissimilarity(h, h.copy()) == 0.0
        assert interval_distance(h, h.copy()) == -1.0


@given(st.integers(0, 2**31 - 1), st.integers(2, 9))
def test_dissimilarity_is_one_minus_intersection(seed, K):
    u, v = random_hists(np.random.default_rng(seed), 2, K)
    assert dissimilarity(u, v) == pytest.approx(1.0 - histogram_intersection(u, v), abs=1e-15)


def test_unnormalized_histograms_are_rejected():
    with pytest.raises(ValueError, match="normalized"):
        interval_distance(np.array([1.0, 1.0]), np.array([0.5, 0.5]))
    with pytest.raises(ValueError, match="normalized"):
        dissimilarity_matrix(np.array([[2.0, 0.0], [1.0, 0.0]]))


def test_single_channel_unit_norm_reduces():
    rng = np.random.default_rng(0)
    cfg = DistanceConfig(("pot",), {"pot": 1.0})
    for u, v in zip(random_hists(rng, 20, 6), random_hists(rng, 20, 6)):
        assert multichannel_distance({"pot": u}, {"pot": v}, cfg) == pytest.approx(
            interval_distance(u, v), abs=1e-12
        )


def test_two_channel_example():
    cfg = DistanceConfig(("pot", "ts"), {"pot": 0.4, "ts": 0.5})
    # 1 - HI = 0.2 on the first channel and 0.6 on the second
    u = {"pot": np.array([1.0, 0.0]), "ts": np.array([1.0, 0.0])}
    v = {"pot": np.array([0.8, 0.2]), "ts": np.array([0.4, 0.6])}
    assert multichannel_distance(u, v, cfg) == pytest.approx(-math.exp(-1.7), abs=1e-12)
    assert multichannel_distance(u, u, cfg) == -1.0


def test_channel_errors():
    with pytest.raises(ChannelError):
        DistanceConfig(("pot",), {"pot": 0.0})
    with pytest.raises(ChannelError):
        DistanceConfig(("pot", "ts"), {"pot": 1.0})
    with pytest.raises(ChannelError):
        DistanceConfig((), {})
    cfg = DistanceConfig(("pot", "ts"), {"pot": 1.0, "ts": 1.0})
    with pytest.raises(ChannelError):
        multichannel_distance({"pot": np.ones(2) / 2}, {"pot": np.ones(2) / 2}, cfg)
    with pytest.raises(ChannelError):
        distance_matrix({"pot": np.eye(2), "ts": np.eye(2)})


def test_distance_matrix_matches_pairwise():
    rng = np.random.default_rng(1)
    chans = {"pot": random_hists(rng, 9, 5), "ts": random_hists(rng, 9, 7)}
    norms = channel_norms(chans)
    cfg = DistanceConfig(("pot", "ts"), norms)
    D = distance_matrix(chans, cfg)
    for i in range(9):
        for j in range(9):
            u = {c: chans[c][i] for c in chans}
            v = {c: chans[c][j] for c in chans}
            assert D[i, j] == pytest.approx(multichannel_distance(u, v, cfg), abs=1e-12)
    single = distance_matrix({"pot": chans["pot"]})
    assert single[2, 5] == pytest.approx(interval_distance(chans["pot"][2], chans["pot"][5]), abs=1e-12)


def test_channel_norm_is_mean_pair_dissimilarity():
    H = np.array([[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]])
    # 1 - HI over the pairs: 1, 0.5, 0.5
    assert channel_norms({"c": H})["c"] == pytest.approx(2 / 3, abs=1e-15)


@given(st.integers(0, 2**31 - 1), st.integers(2, 8))
def test_distance_symmetric_and_bounded(seed, K):
    rng = np.random.default_rng(seed)
    u, v = random_hists(rng, 2, K)
    d = interval_distance(u, v)
    assert d == interval_distance(v, u)
    assert -1.0 <= d <= -math.exp(-1) + 1e-15
    assert (d == -1.0) == np.allclose(u, v, rtol=0, atol=0)


def test_distance_strictly_decreasing_in_intersection():
    his = np.linspace(0, 1, 50)
    ds = [-math.exp(-(1 - h)) for h in his]
    assert all(b < a for a, b in zip(ds, ds[1:]))


# --------------------------------------------------------------------------
# complete linkage


def test_cut_extremes():
    rng = np.random.default_rng(2)
    D = random_distances(rng, 7)
    labels, dendro = hierarchical_cluster(D, 7)
    assert list(labels) == list(range(7))
    assert list(dendro.cut(1)) == [0] * 7
    with pytest.raises(ValueError):
        dendro.cut(0)
    with pytest.raises(ValueError):
        dendro.cut(8)


def test_small_example():
    D = np.array([
        [0, 1, 9, 9],
        [1, 0, 9, 9],
        [9, 9, 0, 2],
        [9, 9, 2, 0],
    ], dtype=float)
    dendro = linkage(D)
    assert dendro.merges == ((0, 1, 1.0, 2), (2, 3, 2.0, 2), (4, 5, 9.0, 4))
    assert list(dendro.cut(2)) == [0, 0, 1, 1]


@pytest.mark.parametrize("ties", [False, True])
def test_matches_naive_linkage(ties):
    rng = np.random.default_rng(3 + ties)
    for _ in range(40):
        n = int(rng.integers(2, 11))
        D = random_distances(rng, n, ties)
        dendro = linkage(D)
        ref, _ = naive_complete_linkage(D)
        assert [m[2] for m in dendro.merges] == [h for _, _, h in ref]
        for k in range(1, n + 1):
            assert list(dendro.cut(k)) == naive_cut(D, k)


def test_eight_random_intervals():
    rng = np.random.default_rng(8)
    H = random_hists(rng, 8, 12)
    D = distance_matrix({"pot": H})
    for k in range(1, 9):
        assert list(hierarchical_cluster(D, k)[0]) == naive_cut(D, k)


def test_rejects_asymmetric_matrix():
    D = np.array([[0.0, 1.0], [1.0 + 1e-6, 0.0]])
    with pytest.raises(ValueError, match="symmetric"):
        linkage(D)
    # within tolerance is accepted
    linkage(np.array([[0.0, 1.0], [1.0 + 1e-12, 0.0]]))
    with pytest.raises(ValueError):
        linkage(np.zeros((2, 3)))


def test_single_leaf():
    labels, dendro = hierarchical_cluster(np.zeros((1, 1)), 1)
    assert list(labels) == [0] and dendro.merges == ()


@given(st.integers(0, 2**31 - 1), st.integers(2, 12), st.booleans())
def test_heights_non_decreasing(seed, n, ties):
    D = random_distances(np.random.default_rng(seed), n, ties)
    h = linkage(D).heights()
    assert np.all(np.diff(h) >= 0)
    assert len(h) == n - 1


@given(st.integers(0, 2**31 - 1), st.integers(2, 12))
def test_cuts_are_nested(seed, n):
    dendro = linkage(random_distances(np.random.default_rng(seed), n))
    for k in range(2, n + 1):
        fine, coarse = dendro.cut(k), dendro.cut(k - 1)
        assert len(set(fine)) == k and len(set(coarse)) == k - 1
        # every fine cluster sits inside one coarse cluster
        for c in set(fine):
            assert len(set(coarse[fine == c])) == 1


@given(st.integers(0, 2**31 - 1), st.integers(2, 10))
def test_monotone_transform_keeps_topology(seed, m):
    H = random_hists(np.random.default_rng(seed), m, 6)
    a = linkage(distance_matrix({"pot": H}))
    b = linkage(dissimilarity_matrix(H))
    assert [x[:2] for x in a.merges] == [x[:2] for x in b.merges]


@given(st.integers(0, 2**31 - 1), st.integers(2, 10))
def test_row_order_does_not_change_partitions(seed, n):
    rng = np.random.default_rng(seed)
    D = random_distances(rng, n)
    perm = rng.permutation(n)
    base, moved = linkage(D), linkage(D[np.ix_(perm, perm)])
    for k in range(1, n + 1):
        x = base.cut(k)
        y = np.empty(n, dtype=np.int64)
        y[perm] = moved.cut(k)
        groups_x = {frozenset(np.flatnonzero(x == c)) for c in set(x)}
        groups_y = {frozenset(np.flatnonzero(y == c)) for c in set(y)}
        assert groups_x == groups_y


def test_deterministic():
    D = random_distances(np.random.default_rng(5), 9, ties=True)
    assert linkage(D) == linkage(D.copy())


# --------------------------------------------------------------------------
# dumps


def test_assignment_round_trip(tmp_path):
    path = tmp_path / "a.txt"
    write_assignments(path, [0, 2, 1], interval_index=[4, 7, 9])
    assert path.read_text() == "cluster 4 0\ncluster 7 2\ncluster 9 1\n"
    assert read_assignments(path) == {4: 0, 7: 2, 9: 1}


def test_malformed_assignment(tmp_path):
    path = tmp_path / "a.txt"
    path.write_text("cluster 1 2\ncluster 3\n")
    with pytest.raises(ValueError, match=":2:"):
        read_assignments(path)


def test_dendrogram_round_trip(tmp_path):
    D = random_distances(np.random.default_rng(6), 6)
    dendro = linkage(D)
    path = tmp_path / "d.txt"
    write_dendrogram(path, dendro)
    back = read_dendrogram(path)
    assert back == dendro
    assert path.read_text().startswith("leaves 6\nmerge ")


def test_dendrogram_merge_count():
    with pytest.raises(ValueError):
        Dendrogram(((0, 1, 1.0, 2),), 3)
