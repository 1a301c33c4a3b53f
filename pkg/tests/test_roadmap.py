import copy
import itertools
import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from autopath import mapgen
from autopath.errors import DestinationOffMap, SchemaError, UnknownLane, ValidationError
from autopath.geometry import Pose2, Side, side_of_path
from autopath.roadmap import cost_to_go, initialize_destination, load_map, manoeuvre_is_legal, nearest_nodes


def test_two_lane_map_node_count(straight_map):
    assert len(straight_map.nodes) == 2 * 101
    assert sorted(straight_map.lanes) == ["0", "1"]


def test_edge_cost_is_arc_length(straight_map):
    for e in straight_map.edges[:: 25]:
        _, xy, _ = e.spline.samples
        chord_sum = np.hypot(*np.diff(xy, axis=0).T).sum()
        assert e.cost == pytest.approx(chord_sum, rel=1e-3)
        assert np.allclose(xy[0], straight_map.nodes[e.src].pose.xy)
        assert np.allclose(xy[-1], straight_map.nodes[e.dst].pose.xy)


def test_boundary_refs_flank_nodes(desk_map):
    for n in desk_map.nodes.values():
        assert side_of_path(desk_map.boundary_point(n.left_boundary_ref), n.pose) is Side.LEFT
        assert side_of_path(desk_map.boundary_point(n.right_boundary_ref), n.pose) is Side.RIGHT


def test_missing_node_reference(straight_doc):
    doc = copy.deepcopy(straight_doc)
    doc["edges"].append({"from": 0, "to": 99999, "kind": "lane_follow"})
    with pytest.raises(ValidationError) as exc:
        load_map(doc)
    assert "99999" in str(exc.value)
    assert exc.value.entity is not None


def test_empty_nodes_is_schema_error(straight_doc):
    doc = copy.deepcopy(straight_doc)
    doc["nodes"] = []
    with pytest.raises(SchemaError):
        load_map(doc)


def test_bad_json_and_version(straight_doc):
    with pytest.raises(SchemaError):
        load_map(b"{not json")
    doc = copy.deepcopy(straight_doc)
    doc["meta"]["version"] = "autopath-map/0"
    with pytest.raises(SchemaError):
        load_map(doc)


def test_disconnected_graph_rejected(straight_doc):
    doc = copy.deepcopy(straight_doc)
    doc["edges"] = [e for e in doc["edges"] if not (e["from"] == 10 or e["to"] == 10)]
    doc["edges"] = [e for e in doc["edges"] if e["from"] < 10 and e["to"] < 10 or e["from"] > 10 and e["to"] > 10
                    or e["from"] >= 101 and e["to"] >= 101]
    with pytest.raises(ValidationError, match="disconnected"):
        load_map(doc)


def test_node_outside_boundaries_rejected(straight_doc):
    doc = copy.deepcopy(straight_doc)
    doc["nodes"][5]["y"] = 30.0
    with pytest.raises(ValidationError) as exc:
        load_map(doc)
    assert exc.value.entity == doc["nodes"][5]["id"]


def test_round_trip(desk_map):
    again = load_map(desk_map.dumps())
    assert again.to_dict() == desk_map.to_dict()
    for i, n in desk_map.nodes.items():
        m = again.nodes[i]
        assert (m.pose, m.lane_id, m.left_boundary_ref, m.right_boundary_ref) == (
            n.pose, n.lane_id, n.left_boundary_ref, n.right_boundary_ref)
    assert [e.cost for e in again.edges] == [e.cost for e in desk_map.edges]


def test_initialize_destination_line(single_lane_map):
    goal = single_lane_map.nodes[50].pose
    dist = initialize_destination(single_lane_map, goal)
    assert dist[50] == 0.0
    assert dist[48] == pytest.approx(4.0, abs=1e-9)
    assert math.isinf(dist[51])
    assert [i for i, d in dist.items() if d == 0.0] == [50]


def test_destination_off_map(single_lane_map):
    with pytest.raises(DestinationOffMap):
        initialize_destination(single_lane_map, Pose2(60, 50, 0))


def _brute_force_costs(edges, nodes, goal):
    """Minimum over all simple paths, by enumeration."""
    out = {}
    succ = {n: [e for e in edges if e.src == n] for n in nodes}

    def walk(n, seen, acc):
        if n == goal:
            return acc
        best = math.inf
        for e in succ[n]:
            if e.dst not in seen:
                best = min(best, walk(e.dst, seen | {e.dst}, acc + e.cost))
        return best

    for n in nodes:
        out[n] = walk(n, {n}, 0.0)
    return out


def test_y_junction_cost_to_go():
    E = lambda s, d, c: SimpleNamespace(src=s, dst=d, cost=c)
    # source 0 splits into branches 1 and 2, both merging into goal 3
    edges = [E(0, 1, 2.0), E(0, 2, 1.0), E(1, 3, 5.0), E(2, 3, 7.0)]
    nodes = [0, 1, 2, 3]
    in_edges = {n: [e for e in edges if e.dst == n] for n in nodes}
    got = cost_to_go(nodes, in_edges, [3])
    assert got == _brute_force_costs(edges, nodes, 3)
    assert got[0] == 7.0


def _bellman_ford(rmap, goal):
    d = {i: math.inf for i in rmap.nodes}
    d[goal] = 0.0
    for _ in range(len(d)):
        changed = False
        for e in rmap.edges:
            c = e.cost + d[e.dst]
            if c < d[e.src]:
                d[e.src] = c
                changed = True
        if not changed:
            break
    return d


@pytest.mark.parametrize("goal_index", [0, 17, 30, 45, 61])
def test_cost_to_go_matches_bellman_ford(short_map, goal_index):
    goal = sorted(short_map.nodes)[goal_index]
    dist = initialize_destination(short_map, short_map.nodes[goal].pose)
    assert dist == _bellman_ford(short_map, goal)
    for e in short_map.edges:
        assert dist[e.src] <= e.cost + dist[e.dst] + 1e-12


def test_nearest_nodes_examples(single_lane_map):
    n7 = single_lane_map.nodes[7]
    assert nearest_nodes(single_lane_map, n7.pose.xy, 3, 5.0)[0].id == 7
    # midway between nodes 7 and 8: the lower id wins the tie
    mid = (single_lane_map.nodes[7].pose.xy + single_lane_map.nodes[8].pose.xy) / 2
    got = nearest_nodes(single_lane_map, mid, 2, 5.0)
    assert [n.id for n in got] == [7, 8]
    assert nearest_nodes(single_lane_map, (500, 500), 3, 5.0) == []


def test_nearest_nodes_matches_linear_scan():
    rmap = load_map(mapgen.straight_map(1000.0))
    assert len(rmap.nodes) >= 1000
    rng = np.random.default_rng(3)
    ids = np.array(list(rmap.nodes))
    xy = np.array([rmap.nodes[i].pose.xy for i in ids])
    for _ in range(300):
        q = rng.uniform([-10, -8], [1010, 8])
        r = rng.uniform(0.5, 12)
        d = np.hypot(*(xy - q).T)
        order = np.lexsort((ids, d))
        want = [int(ids[o]) for o in order if d[o] <= r][:5]
        assert [n.id for n in nearest_nodes(rmap, q, 5, r)] == want


def test_manoeuvre_legality(straight_doc):
    doc = copy.deepcopy(straight_doc)
    rmap = load_map(doc)
    assert manoeuvre_is_legal(rmap, "0", "0")
    assert manoeuvre_is_legal(rmap, "0", "1")
    doc["legality"] = [{"from": "0", "to": "1", "allowed": False}, {"from": "1", "to": "0", "allowed": False}]
    opposing = load_map(doc)
    assert not manoeuvre_is_legal(opposing, "0", "1")
    with pytest.raises(UnknownLane):
        manoeuvre_is_legal(rmap, "0", "7")


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 200), st.floats(-3.7, 3.7))
def test_driveable_inside_road(x, y):
    rmap = _STRAIGHT
    assert rmap.is_driveable((x, y)) == (abs(y) <= 3.7 and -1e-9 <= x <= 200 + 1e-9) or abs(abs(y) - 3.7) < 1e-6


_STRAIGHT = load_map(mapgen.straight_map(200.0))
