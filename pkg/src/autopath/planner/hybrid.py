"""Hybrid lattice / free-space search with lazy edge evaluation.

The forward search is an edge-queue best-first search ordered by
``g(u) + c(u, v) + h(v)``, where ``h`` is the cost-to-go of a goal-rooted
reverse tree that ignores collisions it has not yet been told about. Edges are
collision-checked only when popped; a colliding edge is deleted from the graph
and the reverse tree is repaired incrementally, so the heuristic tightens as the
search learns where obstacles are. The first pass searches the lattice alone;
later rounds add Gaussian samples around the nodes of colliding edges plus a
uniform batch over the driveable area, connect them to the graph, and search
again.
"""
from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..collision import ObstacleSet, VehicleFootprint, edge_in_collision, pose_in_collision
from ..errors import DegenerateEndpoints, DestinationOffMap, NoInvalidNodes, NoPathFound, StartUnconnectable
from ..geometry import HermiteSpline, Polyline, Pose2, arclength_grid, wrap_angle
from ..roadmap import RoadMap, initialize_destination, manoeuvre_is_legal, snap_destination
from .config import PlannerConfig
from .path import PathPoint, PlannedPath
from .reverse_tree import INF, ReverseTree

IMPROVE_EPS = 1e-6
# colliding edges collected before the reverse tree is repaired; stale
# cost-to-go values remain admissible in between
REPAIR_BATCH = 8

LATTICE, FREE, START, GOAL = "lattice", "free", "start", "goal"


@dataclass
class SearchNode:
    id: int
    pose: Pose2
    origin: str
    seed: int  # lattice node supplying lane / boundary context
    lane_id: str
    g: float = INF
    forward_parent: int | None = None


@dataclass(eq=False)
class SearchEdge:
    src: int
    dst: int
    spline: HermiteSpline
    cost: float
    kind: str
    valid: bool | None = None  # None until collision-checked


@dataclass
class PassResult:
    solution: PlannedPath | None
    obstacle_encountered: bool
    improved: bool = False


@dataclass
class SearchState:
    rmap: RoadMap
    obstacles: ObstacleSet  # user obstacles plus curbs
    user_obstacles: ObstacleSet
    config: PlannerConfig
    footprint: VehicleFootprint
    nodes: dict[int, SearchNode]
    out_edges: dict[int, dict[int, SearchEdge]]
    in_edges: dict[int, dict[int, SearchEdge]]
    start: int
    goal: int
    reverse: ReverseTree
    rng: np.random.Generator
    t0: float
    next_id: int
    invalid_nodes: dict[int, set[str]] = field(default_factory=dict)
    all_invalid: dict[int, set[str]] = field(default_factory=dict)
    dead_pairs: set[tuple[int, int]] = field(default_factory=set)
    sample_ids: list[int] = field(default_factory=list)
    sample_xy: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    best_cost: float = INF
    best_edges: list[tuple[int, int]] = field(default_factory=list)
    best_path: PlannedPath | None = None
    passes: int = 0
    rounds: int = 0
    samples_drawn: int = 0
    samples_added: int = 0
    edges_checked: int = 0
    explored: list[list[tuple[int, int]]] = field(default_factory=list)
    solution_costs: list[float] = field(default_factory=list)
    first_solution_time: float | None = None
    first_pass_cost: float = INF
    region: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)

    def elapsed(self) -> float:
        return time.perf_counter() - self.t0

    def timed_out(self) -> bool:
        return self.elapsed() >= self.config.max_planning_time

    def h(self, n: int) -> float:
        return self.reverse.cost_to_go(n)


# -- graph construction ---------------------------------------------------------

def _add_edge(state: SearchState, src: int, dst: int, spline: HermiteSpline, kind: str) -> SearchEdge:
    e = SearchEdge(src, dst, spline, spline.length, kind)
    state.out_edges.setdefault(src, {})[dst] = e
    state.in_edges.setdefault(dst, {})[src] = e
    return e


def _add_node(state: SearchState, pose: Pose2, origin: str, seed: int, lane: str) -> SearchNode:
    n = SearchNode(state.next_id, pose, origin, seed, lane)
    state.next_id += 1
    state.nodes[n.id] = n
    state.out_edges.setdefault(n.id, {})
    state.in_edges.setdefault(n.id, {})
    if origin == FREE:
        state.sample_ids.append(n.id)
        state.sample_xy = np.vstack([state.sample_xy, [[pose.x, pose.y]]])
    return n


def _connection_ok(a: Pose2, b: Pose2, cfg: PlannerConfig) -> bool:
    """Forward-drivable a->b: close enough and every heading change within the limit."""
    dx, dy = b.x - a.x, b.y - a.y
    dist = math.hypot(dx, dy)
    if dist < cfg.min_connect_distance or dist > cfg.connect_radius:
        return False
    chord = math.atan2(dy, dx)
    lim = cfg.max_heading_change
    return (
        abs(wrap_angle(chord - a.heading)) <= lim
        and abs(wrap_angle(b.heading - chord)) <= lim
        and abs(wrap_angle(b.heading - a.heading)) <= lim
    )


def _neighbours(state: SearchState, xy, radius: float) -> list[int]:
    ids: list[int] = []
    if state.config.mode != "freespace":
        ids.extend(n.id for _, n in state.rmap.nearest_with_distance(xy, 10 ** 6, radius))
    if len(state.sample_ids):
        d = np.hypot(state.sample_xy[:, 0] - xy[0], state.sample_xy[:, 1] - xy[1])
        ids.extend(state.sample_ids[i] for i in np.nonzero(d <= radius)[0])
    for special in (state.start, state.goal):
        if special in state.nodes and state.nodes[special].origin in (START, GOAL):
            if math.hypot(state.nodes[special].pose.x - xy[0], state.nodes[special].pose.y - xy[1]) <= radius:
                ids.append(special)
    return ids


def connect_sample(state: SearchState, node: SearchNode) -> int:
    """Create (unchecked) spline edges between ``node`` and compatible neighbours."""
    cfg = state.config
    created = 0
    for m in _neighbours(state, (node.pose.x, node.pose.y), cfg.connect_radius):
        if m == node.id:
            continue
        other = state.nodes[m]
        for a, b in ((node, other), (other, node)):
            if b.id == state.start or a.id == state.goal:
                continue
            if (a.id, b.id) in state.dead_pairs or b.id in state.out_edges.get(a.id, {}):
                continue
            if not _connection_ok(a.pose, b.pose, cfg):
                continue
            if not manoeuvre_is_legal(state.rmap, a.lane_id, b.lane_id):
                continue
            try:
                spline = HermiteSpline(a.pose, b.pose)
            except DegenerateEndpoints:
                continue
            _add_edge(state, a.id, b.id, spline, FREE)
            created += 1
    return created


def _context_node(rmap: RoadMap, pose: Pose2) -> int:
    hits = rmap.nearest_with_distance((pose.x, pose.y), 1, 1e6)
    return hits[0][1].id


def init_search(
    rmap: RoadMap,
    vehicle_pose: Pose2,
    destination: Pose2,
    obstacles: ObstacleSet,
    config: PlannerConfig | None = None,
    footprint: VehicleFootprint | None = None,
) -> SearchState:
    config = config or PlannerConfig()
    footprint = footprint or VehicleFootprint()
    t0 = time.perf_counter()
    goal_node = snap_destination(rmap, destination)
    if config.mode != "freespace":
        initialize_destination(rmap, destination)
    world = obstacles.union(rmap.curbs(config.curb_thickness))
    state = SearchState(
        rmap=rmap, obstacles=world, user_obstacles=obstacles, config=config, footprint=footprint,
        nodes={}, out_edges={}, in_edges={}, start=-1, goal=-1, reverse=None,  # type: ignore[arg-type]
        rng=np.random.default_rng(config.rng_seed), t0=t0,
        next_id=int(rmap.node_ids.max()) + 1 if len(rmap.node_ids) else 0,
    )
    if config.mode != "freespace":
        for n in rmap.nodes.values():
            state.nodes[n.id] = SearchNode(n.id, n.pose, LATTICE, n.id, n.lane_id)
            state.out_edges[n.id] = {}
            state.in_edges[n.id] = {}
        for e in rmap.edges:
            _add_edge(state, e.src, e.dst, e.spline, e.kind.value)
        state.goal = goal_node.id
    else:
        g = _add_node(state, destination, GOAL, goal_node.id, goal_node.lane_id)
        state.goal = g.id

    on_node = None
    if config.mode != "freespace":
        hits = rmap.nearest_with_distance((vehicle_pose.x, vehicle_pose.y), 1, 1e-3)
        if hits and abs(wrap_angle(hits[0][1].pose.heading - vehicle_pose.heading)) < 1e-3:
            on_node = hits[0][1].id
    if on_node is not None:
        state.start = on_node
    else:
        near = rmap.nearest_with_distance((vehicle_pose.x, vehicle_pose.y), 1, config.connect_radius)
        if not near and config.mode != "freespace":
            raise StartUnconnectable(f"no map node within {config.connect_radius} m of {vehicle_pose}")
        seed = near[0][1] if near else rmap.nodes[_context_node(rmap, vehicle_pose)]
        s = _add_node(state, vehicle_pose, START, seed.id, seed.lane_id)
        state.start = s.id
        created = connect_sample(state, s)
        if created == 0 and config.mode != "freespace":
            raise StartUnconnectable(f"vehicle pose {vehicle_pose} has no legal connection within "
                                     f"{config.connect_radius} m")

    state.reverse = ReverseTree(state.out_edges, state.in_edges, state.goal)
    state.reverse.repair()
    xs = [vehicle_pose.x, destination.x] + [o.bbox[0] for o in obstacles] + [o.bbox[2] for o in obstacles]
    ys = [vehicle_pose.y, destination.y] + [o.bbox[1] for o in obstacles] + [o.bbox[3] for o in obstacles]
    m = config.uniform_region_margin
    state.region = (min(xs) - m, min(ys) - m, max(xs) + m, max(ys) + m)
    return state


# -- forward search -------------------------------------------------------------

def _extract(state: SearchState) -> list[SearchEdge]:
    chain = []
    n = state.goal
    while n != state.start:
        p = state.nodes[n].forward_parent
        chain.append(state.out_edges[p][n])
        n = p
    chain.reverse()
    return chain


def build_planned_path(state: SearchState, chain: list[SearchEdge], spacing: float | None = None) -> PlannedPath:
    """Concatenate edge samples and resample at fixed arc-length spacing with per-pose context."""
    spacing = spacing or state.config.path_spacing
    parts = [e.spline.samples[1] if k == 0 else e.spline.samples[1][1:] for k, e in enumerate(chain)]
    dense = np.vstack(parts)
    seg = np.hypot(*np.diff(dense, axis=0).T)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    # arc length at which each edge ends along the concatenated polyline
    ends = np.cumsum([len(p) for p in parts]) - 1
    bounds = np.concatenate([[0.0], cum[ends]])
    keep = np.concatenate([[True], seg > 1e-9])
    pl = Polyline(dense[keep])
    s_grid = arclength_grid(pl.length, spacing)
    pos, hd = pl.interpolate(s_grid)
    hd[0] = chain[0].spline.start.heading
    hd[-1] = chain[-1].spline.end.heading
    points = []
    for s, p, h in zip(s_grid, pos, hd):
        k = int(np.clip(np.searchsorted(bounds, s, side="right") - 1, 0, len(chain) - 1))
        e = chain[k]
        span = bounds[k + 1] - bounds[k]
        frac = (s - bounds[k]) / span if span > 0 else 0.0
        nid = e.src if frac < 0.5 else e.dst
        node = state.nodes[nid]
        points.append(PathPoint(Pose2(p[0], p[1], h), float(s), node.origin, node.seed, node.lane_id, e.kind, nid))
    cost = float(sum(e.cost for e in chain))
    return PlannedPath(tuple(points), cost, tuple((e.src, e.dst) for e in chain), spacing)


def forward_pass(state: SearchState) -> PassResult:
    """One best-first sweep from the vehicle with lazy collision checks."""
    state.passes += 1
    state.invalid_nodes = {}
    explored: list[tuple[int, int]] = []
    state.explored.append(explored)
    for n in state.nodes.values():
        n.g = INF
        n.forward_parent = None
    start = state.nodes[state.start]
    start.g = 0.0
    heap: list[tuple[float, int, int]] = []

    def push_out(u: int) -> None:
        gu = state.nodes[u].g
        for v, e in state.out_edges[u].items():
            hv = state.h(v)
            if hv < INF:
                heapq.heappush(heap, (gu + e.cost + hv, u, v))

    push_out(state.start)
    obstacle = False
    improved = False
    pops = 0
    while heap:
        pops += 1
        if pops % 64 == 0 and state.timed_out():
            break
        key, u, v = heap[0]
        if key >= state.best_cost - IMPROVE_EPS:
            break
        heapq.heappop(heap)
        e = state.out_edges[u].get(v)
        if e is None:
            continue
        gu = state.nodes[u].g
        true_key = gu + e.cost + state.h(v)
        if true_key > key:
            if true_key < INF:
                heapq.heappush(heap, (true_key, u, v))
            continue
        if gu + e.cost >= state.nodes[v].g:
            continue
        explored.append((u, v))
        if e.valid is None:
            rep = edge_in_collision(e.spline, state.footprint, state.obstacles, state.config.collision_margin)
            state.edges_checked += 1
            e.valid = rep.clear
            if not rep.clear:
                obstacle = True
                for nid in (u, v):
                    state.invalid_nodes.setdefault(nid, set()).add(rep.obstacle_id)
                    state.all_invalid.setdefault(nid, set()).add(rep.obstacle_id)
                del state.out_edges[u][v]
                del state.in_edges[v][u]
                state.dead_pairs.add((u, v))
                state.reverse.remove_edge(u, defer=True)
                if state.reverse.pending >= REPAIR_BATCH:
                    state.reverse.flush()
                continue
        elif not e.valid:
            continue
        node_v = state.nodes[v]
        node_v.g = gu + e.cost
        node_v.forward_parent = u
        if v == state.goal:
            state.best_cost = node_v.g
            chain = _extract(state)
            state.best_edges = [(c.src, c.dst) for c in chain]
            state.best_path = build_planned_path(state, chain)
            state.solution_costs.append(state.best_cost)
            if state.first_solution_time is None:
                state.first_solution_time = state.elapsed()
            improved = True
            continue
        push_out(v)
    state.reverse.flush()
    return PassResult(state.best_path if improved else None, obstacle, improved)


# -- sampling -------------------------------------------------------------------

def _sample_valid(state: SearchState, pose: Pose2) -> bool:
    if not state.rmap.is_driveable((pose.x, pose.y)):
        return False
    return not pose_in_collision(pose, state.footprint, state.obstacles, state.config.collision_margin)


def _uniform_batch(state: SearchState, count: int) -> list[tuple[Pose2, int]]:
    cfg = state.config
    x0, y0, x1, y1 = state.region
    out = []
    attempts = 0
    while len(out) < count and attempts < 50 * max(count, 1):
        attempts += 1
        x = state.rng.uniform(x0, x1)
        y = state.rng.uniform(y0, y1)
        yaw_noise = state.rng.normal(0.0, cfg.sigma_yaw)
        yaw_uniform = state.rng.uniform(-math.pi, math.pi)
        if not state.rmap.is_driveable((x, y)):
            continue
        seed = _context_node(state.rmap, Pose2(x, y))
        if cfg.mode == "freespace":
            heading = yaw_uniform
        else:
            heading = state.rmap.nodes[seed].pose.heading + yaw_noise
        out.append((Pose2(x, y, heading), seed))
    return out


def sample_round(state: SearchState) -> int:
    """Draw Gaussian + uniform samples, connect them, refresh the reverse tree."""
    cfg = state.config
    state.rounds += 1
    pool = state.invalid_nodes or state.all_invalid
    candidates: list[tuple[Pose2, int]] = []
    if cfg.mode == "hybrid":
        if not pool:
            raise NoInvalidNodes("no colliding edges recorded; nothing to focus sampling on")
        seeds = sorted(pool)
        for _ in range(cfg.samples_per_round):
            base = state.nodes[seeds[int(state.rng.integers(len(seeds)))]]
            dl, dt, dyaw = state.rng.normal(0.0, 1.0, 3) * (cfg.sigma_long, cfg.sigma_lat, cfg.sigma_yaw)
            c, s = math.cos(base.pose.heading), math.sin(base.pose.heading)
            pose = Pose2(base.pose.x + dl * c - dt * s, base.pose.y + dl * s + dt * c, base.pose.heading + dyaw)
            candidates.append((pose, base.seed))
        candidates.extend(_uniform_batch(state, cfg.uniform_samples_per_round))
    elif cfg.mode == "freespace":
        candidates.extend(_uniform_batch(state, cfg.samples_per_round + cfg.uniform_samples_per_round))
    state.samples_drawn += len(candidates)

    added = []
    for pose, seed in candidates:
        if not _sample_valid(state, pose):
            continue
        lane = state.rmap.nodes[seed].lane_id
        node = _add_node(state, pose, FREE, seed, lane)
        added.append(node)
    touched: set[int] = set()
    for node in added:
        connect_sample(state, node)
    for node in added:
        touched.add(node.id)
        touched.update(state.in_edges[node.id])
    for u in sorted(touched):
        state.reverse.update(u)
    state.reverse.repair()
    state.samples_added += len(added)
    return len(added)


# -- driver ---------------------------------------------------------------------

def plan(
    rmap: RoadMap,
    vehicle_pose: Pose2,
    destination: Pose2,
    obstacles: ObstacleSet,
    config: PlannerConfig | None = None,
    footprint: VehicleFootprint | None = None,
    state_out: list | None = None,
) -> PlannedPath:
    """Run the full search; raises :class:`NoPathFound` when nothing is found in budget."""
    config = config or PlannerConfig()
    try:
        state = init_search(rmap, vehicle_pose, destination, obstacles, config, footprint)
    except (DestinationOffMap, StartUnconnectable) as exc:
        raise NoPathFound(str(exc)) from exc
    if state_out is not None:
        state_out.append(state)
    stale = 0
    last_cost = INF
    while True:
        res = forward_pass(state)
        if state.passes == 1:
            state.first_pass_cost = state.best_cost
        if res.improved and last_cost - state.best_cost > config.improvement_tolerance:
            stale = 0
        else:
            stale += 1
        last_cost = state.best_cost
        if config.mode == "lattice" or state.timed_out():
            break
        if config.mode == "hybrid":
            if not res.obstacle_encountered and state.best_path is not None:
                break
            if not state.all_invalid:
                break
        if state.best_path is not None and stale >= config.improvement_patience:
            break
        if state.rounds >= config.max_rounds:
            break
        sample_round(state)
    if state.best_path is None:
        best_f = state.h(state.start)
        raise NoPathFound(
            f"no path after {state.passes} passes and {state.samples_drawn} samples",
            passes=state.passes, samples=state.samples_drawn, best_f=best_f,
        )
    stats = {
        "passes": state.passes,
        "rounds": state.rounds,
        "samples_drawn": state.samples_drawn,
        "samples_added": state.samples_added,
        "edges_checked": state.edges_checked,
        "first_solution_time": state.first_solution_time,
        "first_pass_cost": state.first_pass_cost,
        "total_time": state.elapsed(),
        "mode": config.mode,
    }
    p = state.best_path
    return PlannedPath(p.points, p.cost, p.edges, p.spacing, stats)
