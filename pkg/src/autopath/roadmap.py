"""Lattice road map: centreline nodes, spline edges, boundaries and cost-to-go."""
from __future__ import annotations

import enum
import heapq
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import jsonschema
import numpy as np
from scipy.spatial import cKDTree

from .errors import DestinationOffMap, SchemaError, UnknownLane, ValidationError
from .geometry import HermiteSpline, PolygonObstacle, Polyline, Pose2, Side, side_of_path, signed_offsets

MAP_VERSION = "autopath-map/1"
SNAP_RADIUS = 2.0
INF = math.inf


class EdgeKind(str, enum.Enum):
    LANE_FOLLOW = "lane_follow"
    LANE_CHANGE = "lane_change"


class BoundaryTag(str, enum.Enum):
    LANE = "lane"
    ROAD = "road"


@dataclass
class MapNode:
    id: int
    pose: Pose2
    lane_id: str
    dist_to_goal: float = INF
    left_boundary_ref: tuple[int, int] = (-1, -1)
    right_boundary_ref: tuple[int, int] = (-1, -1)


@dataclass(eq=False)
class MapEdge:
    src: int
    dst: int
    spline: HermiteSpline
    cost: float
    kind: EdgeKind


@dataclass(eq=False)
class Boundary:
    """Boundary polyline ordered along traffic; lanes named by the side they lie on."""

    polyline: Polyline
    tag: BoundaryTag
    left_lane: str | None = None
    right_lane: str | None = None


@dataclass(eq=False)
class RoadMap:
    nodes: dict[int, MapNode]
    edges: list[MapEdge]
    boundaries: list[Boundary]
    legality: dict[tuple[str, str], bool]
    meta: dict = field(default_factory=dict)
    goal_node: int | None = None

    def __post_init__(self):
        self.out_edges: dict[int, list[MapEdge]] = {i: [] for i in self.nodes}
        self.in_edges: dict[int, list[MapEdge]] = {i: [] for i in self.nodes}
        for e in self.edges:
            self.out_edges[e.src].append(e)
            self.in_edges[e.dst].append(e)
        self.node_ids = np.array(list(self.nodes), dtype=np.int64)
        self.node_xy = np.array([[n.pose.x, n.pose.y] for n in self.nodes.values()], dtype=float).reshape(-1, 2)
        self.node_heading = np.array([n.pose.heading for n in self.nodes.values()], dtype=float)
        self._index = {int(i): k for k, i in enumerate(self.node_ids)}
        self.spatial_index = cKDTree(self.node_xy) if len(self.node_xy) else None
        self.lanes = sorted({n.lane_id for n in self.nodes.values()})
        self.lane_boundaries: dict[str, tuple[int | None, int | None]] = {}
        for lane in self.lanes:
            left = next((i for i, b in enumerate(self.boundaries) if b.right_lane == lane), None)
            right = next((i for i, b in enumerate(self.boundaries) if b.left_lane == lane), None)
            self.lane_boundaries[lane] = (left, right)
        self.boundary_trees = [cKDTree(b.polyline.points) for b in self.boundaries]

    # -- queries ---------------------------------------------------------
    def node(self, node_id: int) -> MapNode:
        return self.nodes[node_id]

    def nearest_with_distance(self, point: Sequence[float], k: int, radius: float) -> list[tuple[float, MapNode]]:
        if k < 1 or radius <= 0:
            raise ValueError("k must be >= 1 and radius > 0")
        if self.spatial_index is None:
            return []
        idx = self.spatial_index.query_ball_point(np.asarray(point, dtype=float), radius)
        if not idx:
            return []
        idx = np.asarray(idx)
        d = np.hypot(self.node_xy[idx, 0] - point[0], self.node_xy[idx, 1] - point[1])
        ids = self.node_ids[idx]
        order = np.lexsort((ids, d))[:k]
        return [(float(d[o]), self.nodes[int(ids[o])]) for o in order]

    def lane_adjacent(self, a: str, b: str) -> bool:
        for bd in self.boundaries:
            if {bd.left_lane, bd.right_lane} == {a, b}:
                return True
        return False

    def boundary_point(self, ref: tuple[int, int]) -> np.ndarray:
        return self.boundaries[ref[0]].polyline.points[ref[1]]

    def is_driveable(self, point: Sequence[float], search_radius: float = 4.0) -> bool:
        """True if ``point`` lies laterally inside the lane strip of a nearby node."""
        for _, n in self.nearest_with_distance(point, 4, search_radius):
            if n.left_boundary_ref[0] < 0 or n.right_boundary_ref[0] < 0:
                continue
            off = signed_offsets(np.asarray(point, dtype=float), n.pose)[0]
            lo = signed_offsets(self.boundary_point(n.right_boundary_ref), n.pose)[0]
            hi = signed_offsets(self.boundary_point(n.left_boundary_ref), n.pose)[0]
            if lo <= off <= hi:
                return True
        return False

    def curbs(self, thickness: float = 0.3) -> list[PolygonObstacle]:
        """Thin polygons just outside each road boundary, for off-road rejection."""
        out = []
        for bi, b in enumerate(self.boundaries):
            if b.tag != BoundaryTag.ROAD:
                continue
            sign = 1.0 if b.left_lane is None else -1.0  # outside = side without a lane
            pts = b.polyline.points
            for i in range(len(pts) - 1):
                p, q = pts[i], pts[i + 1]
                d = (q - p) / np.linalg.norm(q - p)
                n = sign * np.array([-d[1], d[0]]) * thickness
                # small overlap along the segment closes gaps on curves
                p0, q0 = p - 0.05 * d, q + 0.05 * d
                out.append(PolygonObstacle([p0, q0, q0 + n, p0 + n], id=f"curb:{bi}:{i}"))
        return out

    # -- serialization ---------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "meta": dict(self.meta, version=MAP_VERSION),
            "nodes": [
                {"id": n.id, "x": n.pose.x, "y": n.pose.y, "heading": n.pose.heading, "lane_id": n.lane_id}
                for n in self.nodes.values()
            ],
            "edges": [{"from": e.src, "to": e.dst, "kind": e.kind.value} for e in self.edges],
            "boundaries": [
                {
                    "tag": b.tag.value,
                    "points": b.polyline.points.tolist(),
                    "left_lane": b.left_lane,
                    "right_lane": b.right_lane,
                }
                for b in self.boundaries
            ],
            "legality": [{"from": a, "to": b, "allowed": ok} for (a, b), ok in sorted(self.legality.items())],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


_POINT = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
MAP_SCHEMA = {
    "type": "object",
    "required": ["meta", "nodes", "edges", "boundaries", "legality"],
    "properties": {
        "meta": {"type": "object", "required": ["version"], "properties": {"version": {"type": "string"}}},
        "nodes": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["id", "x", "y", "heading", "lane_id"],
                "properties": {
                    "id": {"type": "integer"},
                    "x": {"type": "number"},
                    "y": {"type": "number"},
                    "heading": {"type": "number"},
                    "lane_id": {"type": ["string", "integer"]},
                },
            },
        },
        "edges": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["from", "to", "kind"],
                "properties": {
                    "from": {"type": "integer"},
                    "to": {"type": "integer"},
                    "kind": {"enum": [k.value for k in EdgeKind]},
                },
            },
        },
        "boundaries": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["tag", "points"],
                "properties": {
                    "tag": {"enum": [t.value for t in BoundaryTag]},
                    "points": {"type": "array", "items": _POINT, "minItems": 2},
                    "left_lane": {"type": ["string", "integer", "null"]},
                    "right_lane": {"type": ["string", "integer", "null"]},
                },
            },
        },
        "legality": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["from", "to", "allowed"],
                "properties": {"allowed": {"type": "boolean"}},
            },
        },
    },
}


def _lane(v) -> str | None:
    return None if v is None else str(v)


def load_map(source: bytes | str | dict) -> RoadMap:
    """Parse and validate a map document (JSON bytes/str or an already-decoded dict)."""
    if isinstance(source, dict):
        doc = source
    else:
        try:
            doc = json.loads(source)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise SchemaError(f"map is not valid JSON: {exc}") from exc
    try:
        jsonschema.validate(doc, MAP_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise SchemaError(f"map schema violation at {where}: {exc.message}") from exc
    if doc["meta"]["version"] != MAP_VERSION:
        raise SchemaError(f"unsupported map version {doc['meta']['version']!r}")

    nodes: dict[int, MapNode] = {}
    for nd in doc["nodes"]:
        if nd["id"] in nodes:
            raise ValidationError(f"duplicate node id {nd['id']}", nd["id"])
        nodes[nd["id"]] = MapNode(nd["id"], Pose2(nd["x"], nd["y"], nd["heading"]), str(nd["lane_id"]))

    boundaries = []
    for i, bd in enumerate(doc["boundaries"]):
        try:
            pl = Polyline(bd["points"])
        except ValueError as exc:
            raise ValidationError(f"boundary {i}: {exc}", i) from exc
        boundaries.append(Boundary(pl, BoundaryTag(bd["tag"]), _lane(bd.get("left_lane")), _lane(bd.get("right_lane"))))

    edges = []
    for i, ed in enumerate(doc["edges"]):
        for key in ("from", "to"):
            if ed[key] not in nodes:
                raise ValidationError(f"edge {i} references missing node {ed[key]}", ("edge", i))
        a, b = nodes[ed["from"]].pose, nodes[ed["to"]].pose
        try:
            spline = HermiteSpline(a, b)
        except Exception as exc:
            raise ValidationError(f"edge {i} ({ed['from']}->{ed['to']}): {exc}", ("edge", i)) from exc
        edges.append(MapEdge(ed["from"], ed["to"], spline, spline.length, EdgeKind(ed["kind"])))

    lanes = {n.lane_id for n in nodes.values()}
    legality = {}
    for rule in doc["legality"]:
        key = (str(rule["from"]), str(rule["to"]))
        for lane in key:
            if lane not in lanes:
                raise ValidationError(f"legality rule names unknown lane {lane!r}", key)
        legality[key] = bool(rule["allowed"])

    rmap = RoadMap(nodes, edges, boundaries, legality, meta=dict(doc["meta"]))
    _resolve_boundary_refs(rmap)
    _validate_connectivity(rmap)
    return rmap


def _resolve_boundary_refs(rmap: RoadMap) -> None:
    for n in rmap.nodes.values():
        left, right = rmap.lane_boundaries[n.lane_id]
        if left is None or right is None:
            raise ValidationError(f"node {n.id}: lane {n.lane_id!r} lacks a left/right boundary pair", n.id)
        for side, bi in ((Side.LEFT, left), (Side.RIGHT, right)):
            _, pi = rmap.boundary_trees[bi].query(n.pose.xy)
            pt = rmap.boundaries[bi].polyline.points[pi]
            if side_of_path(pt, n.pose) != side:
                raise ValidationError(
                    f"node {n.id} lies outside its lane boundaries ({side.value} boundary {bi} on wrong side)", n.id
                )
            if side == Side.LEFT:
                n.left_boundary_ref = (bi, int(pi))
            else:
                n.right_boundary_ref = (bi, int(pi))


def _validate_connectivity(rmap: RoadMap) -> None:
    ids = list(rmap.nodes)
    parent = {i: i for i in ids}

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for e in rmap.edges:
        ra, rb = find(e.src), find(e.dst)
        if ra != rb:
            parent[ra] = rb
    roots = {find(i) for i in ids}
    if len(roots) > 1:
        comps: dict[int, list[int]] = {}
        for i in ids:
            comps.setdefault(find(i), []).append(i)
        small = min(comps.values(), key=len)
        raise ValidationError(
            f"road graph is disconnected ({len(roots)} components); e.g. nodes {sorted(small)[:5]} are isolated",
            sorted(small),
        )


def manoeuvre_is_legal(rmap: RoadMap, from_lane: str, to_lane: str) -> bool:
    from_lane, to_lane = str(from_lane), str(to_lane)
    for lane in (from_lane, to_lane):
        if lane not in rmap.lane_boundaries:
            raise UnknownLane(lane)
    if from_lane == to_lane:
        return True
    if (from_lane, to_lane) in rmap.legality:
        return rmap.legality[(from_lane, to_lane)]
    return rmap.lane_adjacent(from_lane, to_lane)


def nearest_nodes(rmap: RoadMap, point: Sequence[float], k: int, radius: float) -> list[MapNode]:
    """Up to ``k`` nodes within ``radius``, nearest first, ties broken by id."""
    return [n for _, n in rmap.nearest_with_distance(point, k, radius)]


def snap_destination(rmap: RoadMap, destination: Pose2, radius: float = SNAP_RADIUS) -> MapNode:
    hits = rmap.nearest_with_distance((destination.x, destination.y), 1, radius)
    if not hits:
        raise DestinationOffMap(f"no map node within {radius} m of {destination}")
    return hits[0][1]


def cost_to_go(
    node_ids: Iterable[int], in_edges: dict[int, list], goals: Iterable[int]
) -> dict[int, float]:
    """Dijkstra over reversed edges; ``in_edges[v]`` lists objects with ``src`` and ``cost``."""
    dist = {i: INF for i in node_ids}
    heap = []
    for g in goals:
        dist[g] = 0.0
        heap.append((0.0, g))
    heapq.heapify(heap)
    while heap:
        d, v = heapq.heappop(heap)
        if d > dist[v]:
            continue
        for e in in_edges.get(v, ()):
            nd = d + e.cost
            if nd < dist[e.src]:
                dist[e.src] = nd
                heapq.heappush(heap, (nd, e.src))
    return dist


def initialize_destination(rmap: RoadMap, destination: Pose2, radius: float = SNAP_RADIUS) -> dict[int, float]:
    """Snap the destination and fill ``dist_to_goal`` with exact lattice cost-to-go."""
    goal = snap_destination(rmap, destination, radius)
    dist = cost_to_go(rmap.nodes, rmap.in_edges, [goal.id])
    for i, n in rmap.nodes.items():
        n.dist_to_goal = dist[i]
    rmap.goal_node = goal.id
    return dist
