import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from shapely.geometry import Polygon

from autopath.collision import ObstacleSet, VehicleFootprint, edge_in_collision, pose_in_collision, poses_collision
from autopath.geometry import HermiteSpline, PolygonObstacle, Pose2

FP = VehicleFootprint(4.6, 1.8, 1.4)


def _shapely_hit(pose, fp, obstacles, margin):
    """Oracle: exact polygon intersection of the inflated footprint rectangle."""
    rect = Polygon(fp.corners(pose, margin))
    return any(rect.intersects(Polygon(o.vertices)) for o in obstacles)


def test_far_obstacle_is_clear():
    obs = ObstacleSet([PolygonObstacle.box((20, 20), 1, 1)])
    assert not pose_in_collision(Pose2(0, 0, 0), FP, obs, 0.2)


def test_vertex_inside_footprint():
    tri = PolygonObstacle(np.array([[1.0, 0.0], [6.0, 5.0], [6.0, -5.0]]))
    assert pose_in_collision(Pose2(0, 0, 0), FP, ObstacleSet([tri]), 0.0)


def test_margin_touch_counts_as_collision():
    front = FP.rear_axle_to_center + FP.length / 2
    box = PolygonObstacle.box((front + 0.3 + 0.5, 0), 1.0, 1.0)  # near face exactly 0.3 m ahead
    obs = ObstacleSet([box])
    assert pose_in_collision(Pose2(0, 0, 0), FP, obs, 0.3)
    assert not pose_in_collision(Pose2(0, 0, 0), FP, obs, 0.29)
    # dense-sampling oracle: closest pair of boundary samples is 0.3 m apart
    t = np.linspace(0, 1, 401)
    fp_c = FP.corners(Pose2(0, 0, 0))
    face = np.outer(1 - t, fp_c[0]) + np.outer(t, fp_c[3])
    bx = box.vertices
    near_face = bx[bx[:, 0] == bx[:, 0].min()]
    obs_pts = np.outer(1 - t, near_face[0]) + np.outer(t, near_face[1])
    gap = np.min(np.hypot(*(face[:, None, :] - obs_pts[None, :, :]).transpose(2, 0, 1)))
    assert gap == pytest.approx(0.3, abs=1e-9)


def test_negative_margin_rejected():
    with pytest.raises(ValueError):
        pose_in_collision(Pose2(0, 0, 0), FP, ObstacleSet(), -0.1)


def test_edge_clear_and_beyond_end():
    sp = HermiteSpline(Pose2(0, 0, 0), Pose2(10, 0, 0))
    assert edge_in_collision(sp, FP, ObstacleSet(), 0.2).clear
    beyond = ObstacleSet([PolygonObstacle.box((25, 0), 1, 1)])
    assert edge_in_collision(sp, FP, beyond, 0.2).clear


def test_edge_first_contact_within_sample_spacing():
    sp = HermiteSpline(Pose2(0, 0, 0), Pose2(10, 0, 0))
    box = PolygonObstacle.box((10, 0), 1.0, 1.0, id="mid")
    rep = edge_in_collision(sp, FP, ObstacleSet([box]), 0.0)
    assert not rep.clear and rep.obstacle_id == "mid"
    # bisection oracle on the exact geometry for the first contact arc length
    lo, hi = 0.0, 10.0
    for _ in range(60):
        mid = (lo + hi) / 2
        if _shapely_hit(Pose2(mid, 0, 0), FP, [box], 0.0):
            hi = mid
        else:
            lo = mid
    assert hi == pytest.approx(10 - 0.5 - FP.rear_axle_to_center - FP.length / 2, abs=1e-9)
    assert 0.0 <= rep.first_s - hi <= sp.spacing + 1e-9


def _random_scene(rng, n):
    obs = []
    for i in range(n):
        if rng.random() < 0.5:
            obs.append(PolygonObstacle.box(rng.uniform(-15, 15, 2), rng.uniform(0.2, 4), rng.uniform(0.2, 4),
                                           rng.uniform(-3, 3), id=str(i)))
        else:
            obs.append(PolygonObstacle.regular(rng.uniform(-15, 15, 2), rng.uniform(0.1, 2), int(rng.integers(3, 10)),
                                               id=str(i)))
    return obs


def test_index_matches_linear_scan_and_shapely():
    rng = np.random.default_rng(11)
    trials = 0
    for _ in range(50):
        obs = _random_scene(rng, int(rng.integers(1, 12)))
        oset = ObstacleSet(obs)
        xy = rng.uniform(-18, 18, (25, 2))
        hd = rng.uniform(-math.pi, math.pi, 25)
        margin = float(rng.uniform(0, 0.5))
        a, _ = poses_collision(xy, hd, FP, oset, margin, use_index=True)
        b, _ = poses_collision(xy, hd, FP, oset, margin, use_index=False)
        assert np.array_equal(a, b)
        for k in range(25):
            assert a[k] == _shapely_hit(Pose2(xy[k, 0], xy[k, 1], hd[k]), FP, obs, margin)
            trials += 1
    assert trials >= 1000


def test_concave_obstacle_matches_shapely():
    u = PolygonObstacle(np.array([[0, 0], [6, 0], [6, 6], [4, 6], [4, 2], [2, 2], [2, 6], [0, 6]], float))
    oset = ObstacleSet([u])
    small = VehicleFootprint(1.0, 0.8, 0.2)
    rng = np.random.default_rng(5)
    for _ in range(400):
        pose = Pose2(*rng.uniform(-2, 8, 2), rng.uniform(-3, 3))
        assert pose_in_collision(pose, small, oset, 0.0) == _shapely_hit(pose, small, [u], 0.0)


@settings(max_examples=80, deadline=None)
@given(st.floats(-10, 10), st.floats(-10, 10), st.floats(-3, 3), st.floats(0, 1), st.floats(0, 1))
def test_margin_monotone(x, y, h, m1, m2):
    obs = ObstacleSet(_random_scene(np.random.default_rng(2), 6))
    lo, hi = sorted((m1, m2))
    pose = Pose2(x, y, h)
    if pose_in_collision(pose, FP, obs, lo):
        assert pose_in_collision(pose, FP, obs, hi)


@settings(max_examples=40, deadline=None)
@given(st.floats(2, 20), st.floats(-6, 6), st.floats(-0.8, 0.8), st.floats(0, 0.5))
def test_clear_edge_implies_clear_samples(x, y, h, margin):
    obs = ObstacleSet(_random_scene(np.random.default_rng(9), 8))
    sp = HermiteSpline(Pose2(-12, 0, 0), Pose2(x, y, h))
    rep = edge_in_collision(sp, FP, obs, margin)
    _, xy, hd = sp.samples
    hits = [pose_in_collision(Pose2(p[0], p[1], t), FP, obs, margin) for p, t in zip(xy, hd)]
    assert rep.clear == (not any(hits))
    if not rep.clear:
        s, _, _ = sp.samples
        assert rep.first_s == s[hits.index(True)]
