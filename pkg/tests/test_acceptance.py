"""Acceptance suite: one PASS/FAIL line per criterion, tolerances as specified.

Run with ``pytest tests/test_acceptance.py -v``; the lines are repeated in the
terminal summary. The SCP study (criteria 3 and 4) takes about ten minutes.
"""
import math

import numpy as np
import pytest

from autopath import mapgen
from autopath.collision import ObstacleSet
from autopath.config import RunConfig, load_config
from autopath.corridor import build_corridor, classify_boundary_points, relinearize
from autopath.experiments import experiment_compare, experiment_scp, experiment_trials
from autopath.geometry import PolygonObstacle, Pose2
from autopath.mpc import ControlInput, MpcParams, jacobians, scp_solve, solve_qp, step_raw
from autopath.planner import PlannerConfig, ReverseTree, forward_pass, init_search, plan
from autopath.roadmap import load_map
from autopath.sim.closed_loop import run_closed_loop
from autopath.sim.plant import PlantParams, PlantState, plant_step
from autopath.sim.scenario import data_path, load_scenario

import test_mpc
import test_planner

# -- 6: numerical property suite (runs first) ------------------------------------------------


def test_6a_jacobians(acceptance_log):
    rng = np.random.default_rng(100)
    p = MpcParams()
    worst, h = 0.0, 1e-6
    for _ in range(200):
        x, u = test_mpc._random_point(rng)
        A, B = jacobians(x, u, p)
        fa = np.column_stack([(step_raw(x + h * e, u, p) - step_raw(x - h * e, u, p)) / (2 * h) for e in np.eye(5)])
        fb = np.column_stack([(step_raw(x, u + h * e, p) - step_raw(x, u - h * e, p)) / (2 * h) for e in np.eye(2)])
        worst = max(worst, float(np.max(np.abs(A - fa) / np.maximum(1.0, np.abs(fa)))),
                    float(np.max(np.abs(B - fb) / np.maximum(1.0, np.abs(fb)))))
    assert acceptance_log("6a", worst <= 1e-4, f"Jacobian vs central differences, 200 points, worst rel err {worst:.2e} (<= 1e-4)")


def test_6b_reverse_tree(acceptance_log):
    bad = 0
    for seed in range(25):
        rng = np.random.default_rng(1000 + seed)
        n = int(rng.integers(20, 501))
        out, inn = test_planner._random_graph(rng, n)
        goal = int(rng.integers(n))
        tree = ReverseTree(out, inn, goal)
        tree.repair()
        for _ in range(5):
            edges = [(u, v) for u in out for v in out[u]]
            for i in rng.choice(len(edges), size=min(len(edges), 20), replace=False):
                u, v = edges[int(i)]
                del out[u][v]
                del inn[v][u]
                tree.remove_edge(u, defer=True)
            tree.flush()
            want = test_planner._dijkstra(out, inn, goal)
            bad += any(tree.cost_to_go(u) != want[u] for u in out)
    assert acceptance_log("6b", bad == 0, f"reverse tree vs Dijkstra, 25 graphs x 5 removal batches, {bad} mismatches (exact)")


def test_6c_first_solution_brute_force(acceptance_log):
    rmap = load_map(mapgen.straight_map(60.0))
    diffs = []
    for bx in (20.0, 27.0, 33.0, 40.0):
        obs = ObstacleSet([PolygonObstacle.regular((bx, -1.85), 0.3, 12, id="b")])
        cfg = PlannerConfig(mode="lattice")
        st = init_search(rmap, rmap.nodes[0].pose, rmap.nodes[29].pose, obs, cfg)
        got = forward_pass(st).solution.cost
        want = test_planner._collision_filtered_dijkstra(
            init_search(rmap, rmap.nodes[0].pose, rmap.nodes[29].pose, obs, cfg))
        diffs.append(abs(got - want))
    ok = max(diffs) <= 1e-9
    assert acceptance_log("6c", ok, f"first solution vs collision-filtered Dijkstra, 4 layouts, max diff {max(diffs):.1e} m")


def test_6d_qp_oracle(acceptance_log):
    rng = np.random.default_rng(500)
    worst = 0.0
    for trial in range(60):
        n, m = int(rng.integers(2, 15)), int(rng.integers(1, 20))
        M = rng.normal(size=(n, n))
        Pm = M @ M.T + 0.1 * np.eye(n)
        q = rng.normal(size=n) * 5
        A = rng.normal(size=(m, n))
        z0 = rng.normal(size=n)
        l, u = A @ z0 - rng.uniform(0, 1, m), A @ z0 + rng.uniform(0, 1, m)
        l[rng.random(m) < 0.3] = -np.inf
        u[rng.random(m) < 0.3] = np.inf
        ref = test_mpc._cvxopt_reference(Pm, q, A, l, u)
        r = solve_qp(test_mpc._qp(Pm, q, A, l, u), tolerance=1e-8)
        obj = 0.5 * ref @ Pm @ ref + q @ ref
        worst = max(worst, abs(r.objective - obj) / max(1.0, abs(obj)))
    assert acceptance_log("6d", worst <= 1e-5, f"QP vs KKT oracle, 60 instances, worst rel objective err {worst:.1e} (<= 1e-5)")


def test_6e_relinearize_idempotent(acceptance_log):
    rmap = load_map(mapgen.straight_map(200.0))
    path = plan(rmap, rmap.nodes[0].pose, rmap.nodes[40].pose, ObstacleSet(), PlannerConfig(mode="lattice"))
    obs = ObstacleSet([PolygonObstacle.box((30.0, -0.95), 2.0, 0.6)])
    cor = build_corridor(path, classify_boundary_points(path, rmap, obs))
    traj = path.xy + np.random.default_rng(3).normal(0, 0.1, path.xy.shape)
    a = relinearize(cor, traj)
    b = relinearize(a, traj)
    ok = np.array_equal(a.coefficients(), b.coefficients()) and np.array_equal(
        relinearize(cor, path.xy).coefficients(), cor.coefficients())
    assert acceptance_log("6e", ok, "relinearize is idempotent and the planned path is a fixed point")


def test_6f_plant_circle(acceptance_log):
    psi, v = 0.1, 5.0
    R = 1.4 / math.tan(psi)
    s = PlantState(Pose2(0, 0, 0), v, psi)
    err = 0.0
    for _ in range(1000):
        s = plant_step(s, ControlInput(0.0, 0.0), 0.01, PlantParams())
        w = v / R * s.t
        err = max(err, math.hypot(s.pose.x - R * math.sin(w), s.pose.y - R * (1 - math.cos(w))))
    assert acceptance_log("6f", err <= 1e-3, f"plant constant-steer arc vs closed form over 10 s, max err {err:.1e} m (<= 1e-3)")


def test_6g_pipeline_determinism(acceptance_log):
    sc = load_scenario(data_path("scenarios", "scp_root.json"))
    cfg = RunConfig()
    a = run_closed_loop(sc, cfg.planner, cfg.mpc, cfg.simulator, cfg.loop).trace_csv()
    b = run_closed_loop(sc, cfg.planner, cfg.mpc, cfg.simulator, cfg.loop).trace_csv()
    assert acceptance_log("6g", a == b, f"two seeded closed-loop runs give byte-identical trace CSVs ({len(a)} bytes)")


# -- 7: slack semantics -----------------------------------------------------------------------


def test_7_slack_semantics(acceptance_log):
    p = MpcParams()
    narrow = scp_solve(test_mpc.ON_PATH, test_mpc._corridor(test_mpc._walls(1.0)), p, 5.0)
    wide = scp_solve(test_mpc.ON_PATH, test_mpc._corridor(test_mpc._walls(1.0 + p.sigma_buffer)), p, 5.0)
    s_n = float(max(narrow.slack_left.max(), narrow.slack_right.max()))
    s_w = float(max(wide.slack_left.max(), wide.slack_right.max()))
    ok = 0 < s_n <= p.sigma_buffer + 1e-9 and narrow.cost > wide.cost and s_w < 1e-6
    assert acceptance_log("7", ok, f"2.0 m corridor: max slack {s_n:.3f} (<= {p.sigma_buffer}), cost {narrow.cost:.2f}; "
                                   f"widened by 2 sigma: max slack {s_w:.1e}, cost {wide.cost:.2f}")


# -- 1 and 2: planner comparison --------------------------------------------------------------


@pytest.fixture(scope="module")
def compare_report():
    sa = load_scenario(data_path("scenarios", "compare_a.json"))
    sb = load_scenario(data_path("scenarios", "compare_b.json"))
    ca = load_config(data_path("configs", "compare_a.json"))
    cb = load_config(data_path("configs", "compare_b.json"))
    return experiment_compare(sa, sb, trials=20, config_a=ca, config_b=cb, seed=0), sa, sb


def test_1_scenario_b(acceptance_log, compare_report):
    rep, _, sb = compare_report
    agg = rep.aggregates
    lat, hyb, free = (agg[f"{sb.name}/{m}"] for m in ("lattice", "hybrid", "freespace"))
    in_budget = sum(1 for r in rep.rows if r["scenario"] == sb.name and r["mode"] == "hybrid" and r["success"]
                    and r["solution_time"] <= 10.0)
    ratio = free["median_solution_time"] / hyb["median_solution_time"]
    ok = lat["successes"] == 0 and in_budget >= 19 and ratio >= 2.0
    assert acceptance_log("1", ok, f"scenario B: lattice {lat['successes']}/1 (no path), hybrid {in_budget}/20 within 10 s, "
                                   f"free-space/hybrid median time ratio {ratio:.1f} (>= 2)")


def test_2_scenario_a(acceptance_log, compare_report):
    rep, sa, _ = compare_report
    agg = rep.aggregates
    lat, hyb = agg[f"{sa.name}/lattice"], agg[f"{sa.name}/hybrid"]
    firsts = [r["first_pass_length"] for r in rep.rows if r["scenario"] == sa.name and r["mode"] == "hybrid"]
    diff = max(abs(f - lat["median_length"]) for f in firsts)
    ratio = hyb["median_solution_time"] / lat["median_solution_time"]
    ok = diff <= 1e-6 and ratio <= 2.0
    assert acceptance_log("2", ok, f"scenario A: hybrid first-pass length vs lattice {lat['median_length']:.3f} m, "
                                   f"max diff {diff:.1e} m (<= 1e-6); hybrid/lattice time ratio {ratio:.2f} (<= 2)")


# -- 3 and 4: SCP iteration study ---------------------------------------------------------------


@pytest.fixture(scope="module")
def scp_report():
    root = load_scenario(data_path("scenarios", "scp_root.json"))
    return experiment_scp(root, counts=(1, 2, 3, 4, 5), n_scenarios=25, seed=0)


def test_3_scp_safety(acceptance_log, scp_report):
    pc = scp_report.aggregates["per_count"]
    d1, d4 = pc["1"]["mean_min_distance"], pc["4"]["mean_min_distance"]
    top2 = pc["4"]["top2_fraction"]
    ok = d4 >= d1 and top2 >= 0.5
    assert acceptance_log("3", ok, f"25 perturbed scenarios: mean min distance k=4 {d4:.4f} m vs k=1 {d1:.4f} m; "
                                   f"k=4 in top two on {top2:.0%} (>= 50%)")


def test_4_scp_timing(acceptance_log, scp_report):
    pc = scp_report.aggregates["per_count"]
    t = [pc[str(k)]["scp_time_mean"] for k in (1, 2, 3, 4, 5)]
    ok = all(b > a for a, b in zip(t, t[1:]))
    assert acceptance_log("4", ok, "mean SCP time per tick for k=1..5: " + ", ".join(f"{x * 1e3:.1f}" for x in t)
                          + " ms (strictly increasing)")


# -- 5: constraint study ------------------------------------------------------------------------


def test_5_constraints(acceptance_log):
    sc = load_scenario(data_path("scenarios", "barrel_slalom.json"))
    rep = experiment_trials(sc, trials=8, seed=0)
    lim = {"max_long_accel": 3.0, "max_long_jerk": 0.9, "max_lat_accel": 3.0, "max_steering_angle": 0.52}
    succ = sum(r["success"] for r in rep.rows)
    worst = {k: max(r[k] for r in rep.rows) for k in lim}
    ok = succ == 8 and all(worst[k] <= lim[k] for k in lim)
    assert acceptance_log("5", ok, f"{succ}/8 reached the goal; maxima " + ", ".join(
        f"{k[4:]} {worst[k]:.3f}/{lim[k]}" for k in lim))
