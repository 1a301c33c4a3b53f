import math
from dataclasses import replace

import numpy as np
import pytest
import shapely.geometry as sg
from hypothesis import given, settings, strategies as hst

from autopath.collision import ObstacleSet, VehicleFootprint
from autopath.config import RunConfig
from autopath.geometry import PolygonObstacle, Pose2
from autopath.mpc import ControlInput
from autopath.sim.closed_loop import run_closed_loop, speed_profile
from autopath.sim.metrics import clearance_series, dynamics_maxima, footprint_clearance_series, limit_violations
from autopath.sim.plant import PlantParams, PlantState, plant_step, saturate
from autopath.sim.scenario import Perturbation, data_path, generate_perturbed_scenarios, load_scenario

PP = PlantParams()
DT = 0.01


def _drive(state, control, seconds):
    for _ in range(int(round(seconds / DT))):
        state = plant_step(state, control, DT, PP)
    return state


# -- plant ----------------------------------------------------------------------------------


def test_constant_speed_straight():
    s = _drive(PlantState(Pose2(0, 0, 0), 5.0), ControlInput(0.0, 0.0), 1.0)
    assert s.pose.x == pytest.approx(5.0, abs=1e-9) and s.pose.y == pytest.approx(0.0, abs=1e-12)
    assert s.t == pytest.approx(1.0)


def test_constant_steering_traces_circle():
    psi, v = 0.1, 5.0
    R = PP.l / math.tan(psi)
    s = PlantState(Pose2(0, 0, 0), v, psi)
    for k in range(1, 1001):
        s = plant_step(s, ControlInput(0.0, 0.0), DT, PP)
        if k % 50 == 0:
            w = v / R * s.t
            assert math.hypot(s.pose.x - R * math.sin(w), s.pose.y - R * (1 - math.cos(w))) <= 1e-3
    assert s.psi == psi


def test_acceleration_saturation_and_jerk():
    a, _ = saturate(PlantState(Pose2(0, 0, 0), 5.0, a=-3.0), ControlInput(-10.0, 0.0), DT, PP)
    assert a == -3.0
    a, _ = saturate(PlantState(Pose2(0, 0, 0), 5.0, a=0.0), ControlInput(-10.0, 0.0), DT, PP)
    assert a == pytest.approx(-0.999 * 0.9 * DT)
    s = plant_step(PlantState(Pose2(0, 0, 0), 0.01, a=-3.0), ControlInput(-3.0, 0.0), DT, PP)
    assert s.v == 0.0


def test_steering_target_bounded_by_speed():
    _, target = saturate(PlantState(Pose2(0, 0, 0), 10.0), ControlInput(0.0, 0.5), DT, PP)
    assert target == pytest.approx(0.999 * math.atan(3.0 * 1.4 / 100.0))
    _, target = saturate(PlantState(Pose2(0, 0, 0), 0.0), ControlInput(0.0, 0.9), DT, PP)
    assert target == pytest.approx(0.999 * 0.52)


def test_steering_lag_first_order():
    s = _drive(PlantState(Pose2(0, 0, 0), 0.0, 0.0), ControlInput(0.0, 0.2), 0.01)
    # one RK4 step of the linear lag psi' = (0.2 - psi) / tau is the 4th-order Taylor polynomial of the decay
    x = DT / 0.2
    assert s.psi == pytest.approx(0.2 * (x - x ** 2 / 2 + x ** 3 / 6 - x ** 4 / 24), rel=1e-12)
    assert s.psi == pytest.approx(0.2 * (1 - math.exp(-x)), rel=1e-7)


def test_invalid_dt():
    with pytest.raises(ValueError):
        plant_step(PlantState(Pose2(0, 0, 0)), ControlInput(0, 0), 0.5, PP)


def test_dynamics_maxima_and_violations():
    t = np.arange(5) * 0.01
    a = np.array([0.0, 0.01, 0.02, 0.03, 3.5])
    m = dynamics_maxima(t, np.full(5, 2.0), np.zeros(5), a, PP)
    assert m["max_long_accel"] == 3.5
    assert m["max_long_jerk"] == pytest.approx(347.0)
    assert limit_violations(m, PP) == ["max_long_accel=3.5>3.0", "max_long_jerk=347>0.9"]


def test_speed_profile():
    prof = speed_profile(np.array([100.0, 8.0, 0.0]), 6.0, 0.5, 1.0)
    assert prof[0] == 6.0 and prof[1] == pytest.approx(math.sqrt(0.25 + 16)) and prof[2] == 0.5


# -- metrics ----------------------------------------------------------------------------------


@settings(max_examples=50, deadline=None)
@given(hst.integers(0, 10 ** 6))
def test_clearance_matches_shapely(seed):
    rng = np.random.default_rng(seed)
    obs = [PolygonObstacle.box(rng.uniform(-10, 10, 2), rng.uniform(0.5, 4), rng.uniform(0.5, 4),
                               rng.uniform(-3, 3)) for _ in range(int(rng.integers(1, 4)))]
    xy = rng.uniform(-15, 15, (20, 2))
    heading = rng.uniform(-3, 3, 20)
    got = clearance_series(xy, ObstacleSet(obs))
    polys = [sg.Polygon(o.vertices) for o in obs]
    want = [min(p.distance(sg.Point(q)) for p in polys) for q in xy]
    np.testing.assert_allclose(got, want, atol=1e-9)
    fp = VehicleFootprint()
    got = footprint_clearance_series(xy, heading, ObstacleSet(obs), fp)
    want = []
    for q, h in zip(xy, heading):
        c, s = math.cos(h), math.sin(h)
        cx, cy = q[0] + fp.rear_axle_to_center * c, q[1] + fp.rear_axle_to_center * s
        box = sg.Polygon(PolygonObstacle.box((cx, cy), fp.length, fp.width, h).vertices)
        want.append(min(p.distance(box) for p in polys))
    np.testing.assert_allclose(got, want, atol=1e-9)


# -- scenarios --------------------------------------------------------------------------------


@pytest.fixture(scope="module")
def scp_root():
    return load_scenario(data_path("scenarios", "scp_root.json"))


def test_perturbation_reproducible_and_distinct(scp_root):
    a = generate_perturbed_scenarios(scp_root, 25, seed=0)
    b = generate_perturbed_scenarios(scp_root, 25, seed=0)
    assert a == b
    layouts = {tuple(o.position for o in sc.obstacles) for sc in a}
    assert len(layouts) == 25
    assert generate_perturbed_scenarios(scp_root, 25, seed=1) != a
    rmap = scp_root.load_map()
    ends = np.array([scp_root.start.xy, scp_root.destination.xy])
    for sc in a:
        for poly in sc.polygons():
            assert all(rmap.is_driveable(p) for p in poly.vertices)
            assert np.min(np.hypot(*(ends - poly.centroid).T)) >= 8.0


def test_zero_sigma_keeps_layout(scp_root):
    root = replace(scp_root, perturbation=Perturbation(sigma=0.0))
    for sc in generate_perturbed_scenarios(root, 5, seed=0):
        assert sc.obstacles == scp_root.obstacles


def test_perturbation_requires_config(scp_root):
    with pytest.raises(ValueError):
        generate_perturbed_scenarios(replace(scp_root, perturbation=None), 3, 0)


# -- closed loop --------------------------------------------------------------------------------


def _run(sc):
    cfg = RunConfig()
    return run_closed_loop(sc, cfg.planner, cfg.mpc, cfg.simulator, cfg.loop)


def test_empty_road_reaches_goal():
    sc = load_scenario(data_path("scenarios", "empty_straight.json"))
    sc = replace(sc, destination=Pose2(60.0, -1.85, 0.0))
    res = _run(sc)
    m = res.metrics
    assert m.success and m.reason == "goal"
    assert math.hypot(res.trace[-1, 1] - 60.0, res.trace[-1, 2] + 1.85) <= 1.0
    assert np.abs(res.trace[:, 2] + 1.85).max() < 0.1
    assert m.violations == [] and m.collisions == 0 and m.fallbacks == 0
    assert math.isinf(m.min_obstacle_distance)


def test_blocked_road_reports_no_path():
    res = _run(load_scenario(data_path("scenarios", "blocked.json")))
    assert not res.metrics.success and res.metrics.reason == "NoPath"
    assert len(res.trace) == 1


def test_closed_loop_trace_is_reproducible(scp_root):
    a = _run(scp_root)
    b = _run(scp_root)
    assert a.trace_csv() == b.trace_csv()
    assert a.metrics.success
    assert a.metrics.min_footprint_clearance > 0
    assert a.trace_csv().splitlines()[0] == "t,x,y,theta,v,psi,a_cmd,dpsi_cmd,min_obst_dist"
