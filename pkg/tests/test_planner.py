import heapq
import math
from types import SimpleNamespace

import numpy as np
import pytest

from autopath import mapgen
from autopath.collision import ObstacleSet, VehicleFootprint, edge_in_collision
from autopath.errors import NoInvalidNodes, NoPathFound, StartUnconnectable
from autopath.geometry import PolygonObstacle, Pose2, wrap_angle
from autopath.planner import PlannerConfig, ReverseTree, connect_sample, forward_pass, init_search, plan, sample_round
from autopath.planner.hybrid import FREE, _add_node
from autopath.roadmap import cost_to_go, load_map
from autopath.sim.scenario import data_path, load_scenario
from autopath.config import load_config

LATTICE = PlannerConfig(mode="lattice")


# -- reverse tree ---------------------------------------------------------------------


def _random_graph(rng, n):
    out, inn = {i: {} for i in range(n)}, {i: {} for i in range(n)}
    for u in range(n):
        for v in rng.choice(n, size=int(rng.integers(1, 5)), replace=False):
            v = int(v)
            if v != u:
                e = SimpleNamespace(src=u, dst=v, cost=float(rng.integers(1, 20)) + float(rng.random()))
                out[u][v] = e
                inn[v][u] = e
    return out, inn


def _dijkstra(out, inn, goal):
    return cost_to_go(list(out), {v: list(es.values()) for v, es in inn.items()}, [goal])


def _check_tree(tree, out, inn, goal):
    want = _dijkstra(out, inn, goal)
    got = {u: tree.cost_to_go(u) for u in out}
    assert got == want
    for u in out:
        if u != goal and math.isfinite(got[u]):
            assert got[u] == min(e.cost + got[v] for v, e in out[u].items())


@pytest.mark.parametrize("seed", range(24))
def test_reverse_tree_matches_dijkstra(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(20, 500))
    out, inn = _random_graph(rng, n)
    goal = int(rng.integers(n))
    tree = ReverseTree(out, inn, goal)
    tree.repair()
    _check_tree(tree, out, inn, goal)
    for _ in range(6):
        # remove a batch of edges, some deferred
        edges = [(u, v) for u in out for v in out[u]]
        for i in rng.choice(len(edges), size=min(len(edges), int(rng.integers(1, 25))), replace=False):
            u, v = edges[int(i)]
            if v in out[u]:
                del out[u][v]
                del inn[v][u]
                tree.remove_edge(u, defer=bool(rng.random() < 0.7))
        tree.flush()
        _check_tree(tree, out, inn, goal)
        # add a few new nodes/edges, as sampling rounds do
        for _ in range(int(rng.integers(0, 10))):
            u, v = (int(x) for x in rng.choice(n, 2, replace=False))
            if v not in out[u]:
                e = SimpleNamespace(src=u, dst=v, cost=float(rng.integers(1, 20)))
                out[u][v] = e
                inn[v][u] = e
                tree.update(u)
        tree.repair()
        _check_tree(tree, out, inn, goal)
        assert tree.consistent()


# -- initialisation and connection ----------------------------------------------------------


def test_init_on_node_uses_lattice_edges(straight_map):
    st = init_search(straight_map, straight_map.nodes[0].pose, straight_map.nodes[90].pose, ObstacleSet(), LATTICE)
    assert st.start == 0
    assert set(st.out_edges[0]) == {e.dst for e in straight_map.out_edges[0]}


def test_init_offset_start_connects_downstream(straight_map):
    cfg = PlannerConfig()
    pose = Pose2(10.0, -1.85 + 0.5, 0.0)
    st = init_search(straight_map, pose, straight_map.nodes[90].pose, ObstacleSet(), cfg)
    assert st.nodes[st.start].origin == "start"
    edges = list(st.out_edges[st.start].values())
    assert len(edges) >= 1
    for e in edges:
        dst = st.nodes[e.dst].pose
        assert dst.x > pose.x
        _, xy, hd = e.spline.samples
        assert np.allclose(xy[0], pose.xy) and np.allclose(xy[-1], dst.xy)
        chord = math.atan2(dst.y - pose.y, dst.x - pose.x)
        assert abs(wrap_angle(chord - pose.heading)) <= cfg.max_heading_change
        assert abs(wrap_angle(dst.heading - pose.heading)) <= cfg.max_heading_change
        assert pose.distance_to(dst) <= cfg.connect_radius


def test_init_off_map_unconnectable(straight_map):
    with pytest.raises(StartUnconnectable):
        init_search(straight_map, Pose2(50, 50, 0), straight_map.nodes[90].pose, ObstacleSet(),
                    PlannerConfig(connect_radius=10.0))


def _state_with_sample(rmap, pose, seed_node, cfg=None):
    st = init_search(rmap, rmap.nodes[0].pose, rmap.nodes[90].pose, ObstacleSet(), cfg or PlannerConfig())
    seed = rmap.nodes[seed_node]
    node = _add_node(st, pose, FREE, seed.id, seed.lane_id)
    return st, node


def test_connect_aligned_sample(straight_map):
    st, node = _state_with_sample(straight_map, Pose2(40.0, -1.85 + 1.0, 0.0), 20)
    created = connect_sample(st, node)
    # oracle: count lattice nodes satisfying the distance and heading rules in each direction
    cfg = st.config
    want = 0
    for n in straight_map.nodes.values():
        for a, b in ((node.pose, n.pose), (n.pose, node.pose)):
            d = a.distance_to(b)
            if cfg.min_connect_distance <= d <= cfg.connect_radius:
                chord = math.atan2(b.y - a.y, b.x - a.x)
                if abs(wrap_angle(chord - a.heading)) <= cfg.max_heading_change and \
                        abs(wrap_angle(b.heading - chord)) <= cfg.max_heading_change:
                    want += 1
    assert created == want >= 2
    assert any(st.nodes[v].pose.x > 40 for v in st.out_edges[node.id])
    assert any(st.nodes[u].pose.x < 40 for u in st.in_edges[node.id])


def test_connect_crossways_sample_gets_nothing(straight_map):
    st, node = _state_with_sample(straight_map, Pose2(40.0, -1.85, math.pi / 2), 20,
                                  PlannerConfig(max_heading_change=math.pi / 4))
    assert connect_sample(st, node) == 0


def test_connect_respects_lane_legality(straight_doc):
    doc = dict(straight_doc)
    doc["legality"] = [{"from": "0", "to": "1", "allowed": False}, {"from": "1", "to": "0", "allowed": False}]
    rmap = load_map(doc)
    st, node = _state_with_sample(rmap, Pose2(40.0, 0.0, 0.0), 20)
    connect_sample(st, node)
    lanes = {st.nodes[m].lane_id for m in list(st.out_edges[node.id]) + list(st.in_edges[node.id])}
    assert lanes == {"0"}


# -- forward search ------------------------------------------------------------------------


def _collision_filtered_dijkstra(st):
    """Brute force: check every lattice edge, then run plain Dijkstra from the start."""
    live = {}
    for u, es in st.out_edges.items():
        for v, e in es.items():
            if edge_in_collision(e.spline, st.footprint, st.obstacles, st.config.collision_margin).clear:
                live.setdefault(u, []).append((v, e.cost))
    dist = {st.start: 0.0}
    heap = [(0.0, st.start)]
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist.get(u, math.inf):
            continue
        for v, c in live.get(u, ()):
            if d + c < dist.get(v, math.inf):
                dist[v] = d + c
                heapq.heappush(heap, (d + c, v))
    return dist.get(st.goal, math.inf)


def test_empty_road_first_pass_is_lattice_shortest(straight_map):
    st = init_search(straight_map, straight_map.nodes[0].pose, straight_map.nodes[100].pose, ObstacleSet(), LATTICE)
    res = forward_pass(st)
    assert not res.obstacle_encountered
    assert res.solution.cost == pytest.approx(200.0, abs=1e-6)
    assert res.solution.cost == pytest.approx(_collision_filtered_dijkstra(st), abs=1e-9)


@pytest.mark.parametrize("barrel_x", [23.0, 31.0, 38.5])
def test_first_solution_matches_brute_force(short_map, barrel_x):
    barrel = PolygonObstacle.regular((barrel_x, -1.85), 0.3, 12, id="barrel")
    obs = ObstacleSet([barrel])
    st = init_search(short_map, short_map.nodes[0].pose, short_map.nodes[29].pose, obs, LATTICE)
    res = forward_pass(st)
    assert res.obstacle_encountered
    fresh = init_search(short_map, short_map.nodes[0].pose, short_map.nodes[29].pose, obs, LATTICE)
    want = _collision_filtered_dijkstra(fresh)
    assert res.solution.cost == pytest.approx(want, abs=1e-9)
    kinds = {pt.edge_kind for pt in res.solution.points}
    assert "lane_change" in kinds
    for u, v in st.best_edges:
        assert st.out_edges[u][v].valid is True


def _bundled(name):
    return load_scenario(data_path("scenarios", f"{name}.json"))


def test_scenario_b_lattice_fails():
    sc = _bundled("compare_b")
    cfg = load_config(data_path("configs", "compare_b.json")).planner.with_(mode="lattice")
    rmap = sc.load_map()
    st = init_search(rmap, sc.start, sc.destination, sc.obstacle_set(), cfg)
    res = forward_pass(st)
    assert res.solution is None and res.obstacle_encountered
    with pytest.raises(NoPathFound) as exc:
        plan(rmap, sc.start, sc.destination, sc.obstacle_set(), cfg)
    assert exc.value.passes == 1


def test_scenario_b_hybrid_finds_gap_path():
    sc = _bundled("compare_b")
    cfg = load_config(data_path("configs", "compare_b.json")).planner.with_(rng_seed=3)
    rmap = sc.load_map()
    path = plan(rmap, sc.start, sc.destination, sc.obstacle_set(), cfg)
    assert path.stats["passes"] >= 2
    assert any(pt.source == "free" for pt in path.points)
    # the path goes between the two blocks
    near = path.xy[np.abs(path.xy[:, 0] - 80) < 0.5]
    assert np.all(np.abs(near[:, 1]) < 1.0)


def test_scenario_a_first_pass_purity():
    sc = _bundled("compare_a")
    cfg = load_config(data_path("configs", "compare_a.json")).planner
    rmap = sc.load_map()
    lat_state, hyb_state = [], []
    lat = plan(rmap, sc.start, sc.destination, sc.obstacle_set(), cfg.with_(mode="lattice"), state_out=lat_state)
    hyb = plan(rmap, sc.start, sc.destination, sc.obstacle_set(), cfg, state_out=hyb_state)
    assert hyb.stats["first_pass_cost"] == lat.cost
    assert hyb_state[0].explored[0] == lat_state[0].explored[0]
    assert hyb_state[0].solution_costs[0] == lat.cost
    assert abs(hyb.cost - lat.cost) <= 0.5
    costs = hyb_state[0].solution_costs
    assert all(b <= a for a, b in zip(costs, costs[1:]))


def test_plan_deterministic():
    sc = _bundled("compare_b")
    cfg = load_config(data_path("configs", "compare_b.json")).planner.with_(rng_seed=5, max_planning_time=120.0,
                                                                           max_rounds=6)
    rmap = sc.load_map()
    a = plan(rmap, sc.start, sc.destination, sc.obstacle_set(), cfg)
    b = plan(rmap, sc.start, sc.destination, sc.obstacle_set(), cfg)
    assert a == b
    assert [p.pose for p in a.points] == [p.pose for p in b.points]


def test_goal_off_map_no_path(straight_map):
    with pytest.raises(NoPathFound):
        plan(straight_map, straight_map.nodes[0].pose, Pose2(100, 80, 0), ObstacleSet(), PlannerConfig())


# -- sampling ----------------------------------------------------------------------------------


@pytest.fixture
def three_lane():
    return load_map(mapgen.straight_map(120.0, n_lanes=3))


def _sampling_state(rmap, obstacles=(), **kw):
    cfg = PlannerConfig(samples_per_round=100, uniform_samples_per_round=0, **kw)
    st = init_search(rmap, rmap.nodes[61].pose, rmap.nodes[61 + 55].pose, ObstacleSet(obstacles), cfg)
    return st


def test_sample_round_requires_invalid_nodes(three_lane):
    st = _sampling_state(three_lane)
    with pytest.raises(NoInvalidNodes):
        sample_round(st)


def test_gaussian_lateral_spread(three_lane):
    centre = 61 + 30  # middle lane, x = 60
    st = _sampling_state(three_lane, sigma_lat=1.0)
    st.invalid_nodes = {centre: {"x"}}
    before = set(st.nodes)
    added = sample_round(st)
    new = [st.nodes[i] for i in st.nodes if i not in before]
    assert added == len(new) >= 80
    base = three_lane.nodes[centre].pose
    lat = np.array([n.pose.y - base.y for n in new])
    assert 0.7 <= lat.std() <= 1.3
    assert all(n.seed == centre and n.lane_id == three_lane.nodes[centre].lane_id for n in new)


def test_gaussian_samples_inside_obstacle_rejected(three_lane):
    centre = 61 + 30
    wall = PolygonObstacle.box((60, 0), 60, 11.1)
    st = _sampling_state(three_lane, [wall])
    st.invalid_nodes = {centre: {"wall"}}
    assert sample_round(st) == 0


def test_sampling_deterministic(three_lane):
    poses = []
    for _ in range(2):
        st = _sampling_state(three_lane, rng_seed=42)
        st.invalid_nodes = {61 + 30: {"x"}, 61 + 35: {"x"}}
        sample_round(st)
        poses.append([st.nodes[i].pose for i in st.sample_ids])
    assert poses[0] == poses[1] and len(poses[0]) > 0
