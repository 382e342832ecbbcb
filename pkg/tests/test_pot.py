import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from potminer.ingest import Shot, Trajectory, compute_frame_motion_stats
from potminer.pot import (
    DegenerateError, PoTCandidate, SelectionConfig, compute_descriptor, compute_ts_descriptor,
    descriptor_dim, descriptor_from_positions, extract_pots, order_pair, read_pots,
    read_pot_table, retained_count, score_candidate, select_pots, write_pots,
)

from conftest import linear_traj, shot_from_velocities


def with_static(moving_velocities, static=3):
    """Moving trajectories plus ``static`` still ones, so the lower median is zero."""
    v = np.asarray(moving_velocities, dtype=float)
    z = np.zeros((static,) + v.shape[1:])
    return shot_from_velocities(np.concatenate([v, z]), origins=[(10 * i, 0) for i in range(len(v) + static)])


# --------------------------------------------------------------------------
# ordering and scoring


def test_anchor_is_the_trajectory_on_the_median():
    v = np.zeros((2, 3, 2))
    v[1, :, 0] = 2.0
    shot = with_static(v)
    st_ = compute_frame_motion_stats(shot, 3)
    a, b = shot.trajectories[0], shot.trajectories[1]
    assert order_pair(a, b, st_, 0, 3) == (0, 1)
    assert order_pair(b, a, st_, 0, 3) == (0, 1)


def test_equal_deviation_breaks_tie_by_id():
    v = np.zeros((2, 3, 2))
    v[:, :, 1] = 1.0
    shot = with_static(v)
    st_ = compute_frame_motion_stats(shot, 3)
    a, b = shot.trajectories[0], shot.trajectories[1]
    assert order_pair(b, a, st_, 0, 3) == (0, 1)


def test_deviation_sums_three_against_one_point_two():
    v = np.zeros((2, 3, 2))
    v[0, :, 0] = 1.0  # 3 transitions x 1.0 = 3.0
    v[1, :, 0] = 0.4  # 3 x 0.4 = 1.2
    shot = with_static(v)
    st_ = compute_frame_motion_stats(shot, 3)
    assert order_pair(shot.trajectories[0], shot.trajectories[1], st_, 0, 3) == (1, 0)


def test_swing_deviating_by_two_scores_twenty():
    v = np.zeros((2, 10, 2))
    v[1, :, 0] = 1.2
    v[1, :, 1] = 1.6  # magnitude 2
    shot = with_static(v)
    st_ = compute_frame_motion_stats(shot, 10)
    s = score_candidate(shot.trajectories[0], shot.trajectories[1], st_, 0, 10)
    assert s == pytest.approx(20.0, abs=1e-12)


def test_identical_motion_scores_zero():
    v = np.zeros((2, 10, 2))
    v[:, :, 0] = 0.5
    shot = with_static(v)
    st_ = compute_frame_motion_stats(shot, 10)
    assert score_candidate(shot.trajectories[0], shot.trajectories[1], st_, 0, 10) == 0.0


def test_half_against_one_and_a_half_scores_ten():
    v = np.zeros((2, 10, 2))
    v[0, :, 0] = 0.5
    v[1, :, 0] = -1.5
    shot = with_static(v)
    st_ = compute_frame_motion_stats(shot, 10)
    s = score_candidate(shot.trajectories[0], shot.trajectories[1], st_, 0, 10)
    assert s == pytest.approx(10.0, abs=1e-12)


def test_window_must_be_foreground():
    t = Trajectory(0, 0, np.arange(12.0).reshape(6, 2), [1, 1, 1, 0, 1, 1])
    u = linear_traj(1, 0, 6, (1, 0))
    st_ = compute_frame_motion_stats(Shot(0, 6, (t, u)), 2)
    with pytest.raises(ValueError):
        order_pair(t, u, st_, 2, 2)


# --------------------------------------------------------------------------
# selection


def test_static_shot_selects_nothing():
    shot = Shot(0, 20, tuple(linear_traj(i, 0, 20, (0, 0), origin=(i, i)) for i in range(5)))
    st_ = compute_frame_motion_stats(shot, 10)
    assert select_pots(shot, st_, SelectionConfig()) == {}


def test_ten_pairs_keep_two_top_scores():
    rng = np.random.default_rng(3)
    v = rng.normal(size=(5, 4, 2)) * np.array([[[0.1]], [[1]], [[2]], [[3]], [[4]]])
    shot = shot_from_velocities(v)
    st_ = compute_frame_motion_stats(shot, 3)
    cfg = SelectionConfig(n=3, theta_P=0.15, theta_F=0.0)
    got = select_pots(shot, st_, cfg)[0]
    assert len(got) == 2
    # oracle: score every unordered pair explicitly and rank
    tr = shot.trajectories
    scored = []
    for i in range(5):
        for j in range(i + 1, 5):
            a, s = order_pair(tr[i], tr[j], st_, 0, 3)
            scored.append((-score_candidate(tr[a], tr[s], st_, 0, 3), a, s))
    scored.sort()
    assert [(c.anchor_id, c.swing_id) for c in got] == [(a, s) for _, a, s in scored[:2]]


@pytest.mark.parametrize("m, p, want", [(10, 0.15, 2), (20, 0.15, 3), (1, 0.01, 1), (7, 1.0, 7)])
def test_retained_count_is_ceiling(m, p, want):
    assert retained_count(m, p) == want


def test_pruned_frames_have_no_candidates():
    rng = np.random.default_rng(0)
    v = rng.normal(size=(4, 30, 2))
    v[:, 10:20] = 0.5  # identical motion: sigma 0
    shot = shot_from_velocities(v)
    st_ = compute_frame_motion_stats(shot, 3)
    got = select_pots(shot, st_, SelectionConfig(n=3, theta_F=0.1))
    for f in got:
        assert st_.articulation_score[f] >= 0.1
    assert not any(10 <= f <= 17 for f in got)


def test_ranking_ties_break_by_anchor_then_swing():
    # four identical movers deviating equally, one on the median: three tied pairs
    v = np.zeros((4, 3, 2))
    v[1:, :, 0] = 1.0
    shot = with_static(v, static=4)
    st_ = compute_frame_motion_stats(shot, 3)
    got = select_pots(shot, st_, SelectionConfig(n=3, theta_P=0.1, theta_F=0.0))[0]
    ranked = [(c.anchor_id, c.swing_id) for c in got]
    assert ranked[:3] == [(0, 1), (0, 2), (0, 3)]


random_shots = st.integers(0, 10**6).map(
    lambda seed: shot_from_velocities(np.random.default_rng(seed).normal(size=(6, 14, 2)))
)


@given(random_shots, st.floats(0.01, 0.5), st.floats(0.0, 0.5))
def test_larger_retention_keeps_earlier_picks(shot, p, extra):
    st_ = compute_frame_motion_stats(shot, 4)
    small = select_pots(shot, st_, SelectionConfig(4, p, 0.0))
    big = select_pots(shot, st_, SelectionConfig(4, min(1.0, p + extra), 0.0))
    for f, cands in small.items():
        keys = {(c.anchor_id, c.swing_id) for c in big[f]}
        assert all((c.anchor_id, c.swing_id) in keys for c in cands)


@given(random_shots, st.integers(0, 9))
def test_ordering_is_symmetric_and_scores_nonnegative(shot, f):
    st_ = compute_frame_motion_stats(shot, 4)
    tr = shot.trajectories
    for i in range(len(tr)):
        for j in range(i + 1, len(tr)):
            a, s = order_pair(tr[i], tr[j], st_, f, 4)
            assert order_pair(tr[j], tr[i], st_, f, 4) == (a, s)
            assert score_candidate(tr[a], tr[s], st_, f, 4) >= 0


def test_selected_candidates_satisfy_ordering_invariant():
    rng = np.random.default_rng(1)
    shot = shot_from_velocities(rng.normal(size=(7, 25, 2)))
    st_ = compute_frame_motion_stats(shot, 10)
    for f, cands in select_pots(shot, st_, SelectionConfig(theta_F=0.0)).items():
        for c in cands:
            assert c.score >= 0 and c.window == 10 and c.start_frame == f


# --------------------------------------------------------------------------
# descriptors


def test_three_frame_descriptor_by_hand():
    anchor = np.zeros((3, 2))
    swing = np.array([[1.0, 0.0], [1.1, 0.0], [1.2, 0.0]])
    d = descriptor_from_positions(anchor, swing)
    assert d.theta == 0.0
    np.testing.assert_allclose(d.displacements, [[0.5, 0.0], [0.5, 0.0]], atol=1e-12)
    assert d.total_displacement == pytest.approx(0.2, abs=1e-12)


def test_descriptor_dimension_for_ten_frames():
    assert descriptor_dim(10) == 19
    rng = np.random.default_rng(0)
    d = descriptor_from_positions(rng.normal(size=(10, 2)), rng.normal(size=(10, 2)))
    assert d.vector().shape == (19,) and d.dim == 19


def test_rigid_pair_is_degenerate():
    a = linear_traj(0, 0, 10, (1, 1))
    b = linear_traj(1, 0, 10, (1, 1), origin=(5, 0))
    with pytest.raises(DegenerateError):
        compute_descriptor(a, b, 0, 10)


def test_theta_range_is_half_open():
    d = descriptor_from_positions(np.zeros((2, 2)), np.array([[-1.0, 0.0], [0.0, 1.0]]))
    # atan2(0, -1) = +pi is folded onto -pi
    assert d.theta == -math.pi


# exactly representable coordinates: sums and differences are exact in binary
dyadic = st.integers(-2**20, 2**20).map(lambda i: i / 1024)


@st.composite
def pair_windows(draw, n=10):
    a = np.array(draw(st.lists(dyadic, min_size=2 * n, max_size=2 * n))).reshape(n, 2)
    s = np.array(draw(st.lists(dyadic, min_size=2 * n, max_size=2 * n))).reshape(n, 2)
    r = s - a
    assume(np.hypot(*np.diff(r, axis=0).T).sum() > 1e-3)
    return a, s


@given(pair_windows(), st.lists(dyadic, min_size=20, max_size=20))
def test_common_offset_leaves_descriptor_bit_identical(pair, off):
    a, s = pair
    o = np.array(off).reshape(10, 2)
    d0 = descriptor_from_positions(a, s)
    d1 = descriptor_from_positions(a + o, s + o)
    assert d1.theta == d0.theta
    assert np.array_equal(d1.displacements, d0.displacements)


@given(pair_windows(), st.floats(0.01, 100))
def test_scaling_keeps_descriptor(pair, c):
    a, s = pair
    d0 = descriptor_from_positions(a, s)
    d1 = descriptor_from_positions(c * a, c * s)
    assert d1.theta == pytest.approx(d0.theta, abs=1e-9)
    np.testing.assert_allclose(d1.displacements, d0.displacements, rtol=1e-9, atol=1e-12)


@given(pair_windows())
def test_displacements_have_unit_total_length(pair):
    d = descriptor_from_positions(*pair)
    assert abs(np.hypot(*d.displacements.T).sum() - 1.0) < 1e-9
    assert -math.pi <= d.theta < math.pi


@given(pair_windows(), st.floats(-math.pi, math.pi))
def test_rotation_is_equivariant(pair, phi):
    a, s = pair
    R = np.array([[math.cos(phi), -math.sin(phi)], [math.sin(phi), math.cos(phi)]])
    d0 = descriptor_from_positions(a, s)
    d1 = descriptor_from_positions(a @ R.T, s @ R.T)
    diff = (d1.theta - d0.theta - phi + math.pi) % (2 * math.pi) - math.pi
    assert abs(diff) < 1e-7
    np.testing.assert_allclose(d1.displacements, d0.displacements @ R.T, atol=1e-9)


def test_ts_uniform_motion():
    d = compute_ts_descriptor(linear_traj(0, 0, 10, (1, 0)), 0, 10)
    np.testing.assert_allclose(d.reshape(9, 2), np.tile([1 / 9, 0.0], (9, 1)), atol=1e-15)


def test_ts_static_is_degenerate():
    with pytest.raises(DegenerateError):
        compute_ts_descriptor(linear_traj(0, 0, 10, (0, 0)), 0, 10)


def test_ts_reversing_motion_keeps_signs():
    v = np.array([[1.0, 0]] * 4 + [[-1.0, 0]] * 5)
    pts = np.vstack([[0, 0], np.cumsum(v, axis=0)])
    d = compute_ts_descriptor(Trajectory(0, 0, pts, np.ones(10, bool)), 0, 10).reshape(9, 2)
    np.testing.assert_allclose(d[:, 0], [1 / 9] * 4 + [-1 / 9] * 5, atol=1e-15)
    np.testing.assert_array_equal(d[:, 1], 0)


# --------------------------------------------------------------------------
# dump format


def test_pot_dump_round_trip(tmp_path):
    rng = np.random.default_rng(5)
    shot = shot_from_velocities(rng.normal(size=(6, 20, 2)), shot_id=4)
    st_ = compute_frame_motion_stats(shot, 10)
    pots = extract_pots(shot, st_, SelectionConfig(theta_F=0.0))
    assert pots
    path = tmp_path / "pots.txt"
    write_pots(path, pots)
    back = list(read_pots(path))
    assert len(back) == len(pots)
    for p, q in zip(pots, back):
        assert (q.shot_id, q.candidate.anchor_id, q.candidate.swing_id, q.start_frame) == (
            p.shot_id, p.candidate.anchor_id, p.candidate.swing_id, p.start_frame
        )
        assert q.candidate.score == p.candidate.score
        assert np.array_equal(q.descriptor.vector(), p.descriptor.vector())
    table = read_pot_table(path)
    assert np.array_equal(table.vectors, np.array([p.descriptor.vector() for p in pots]))
    assert table.start_frame.tolist() == [p.start_frame for p in pots]


def test_candidate_fields():
    c = PoTCandidate(1, 2, 3, 10, 0.5)
    assert (c.anchor_id, c.swing_id, c.start_frame, c.window) == (1, 2, 3, 10)
