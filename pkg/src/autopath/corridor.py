"""Per-step half-plane corridors around a planned path.

Each path pose gets a left and a right candidate set of boundary points (lane
or road boundary samples plus obstacle outline points), split by which side of
the pose they fall on. The constraint line on each side passes through the
nearest candidate and runs parallel to the local travel direction.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .collision import ObstacleSet
from .errors import DegenerateCorridor, MissingBoundaryContext
from .geometry import SIDE_EPS, HalfPlane, Pose2, Side, finite_difference_tangents
from .planner.path import PathPoint, PlannedPath
from .roadmap import BoundaryTag, RoadMap, manoeuvre_is_legal

SIGMA_BUFFER = 0.3
LOOKAHEAD = 15.0
LOOKBEHIND = 5.0
BOUNDARY_RADIUS = 12.0
OBSTACLE_POINT_SPACING = 0.5


class PointSource(str, enum.Enum):
    LANE = "lane"
    ROAD = "road"
    OBSTACLE = "obstacle"


@dataclass(frozen=True)
class BoundaryPoint:
    position: tuple[float, float]
    source: PointSource
    side: Side
    obstacle_id: str | None = None


@dataclass(frozen=True, eq=False)
class PoseCandidates:
    """Side-split candidate points for one path pose (arrays are (k, 2))."""

    left: np.ndarray
    right: np.ndarray
    left_src: tuple[tuple[PointSource, str | None], ...]
    right_src: tuple[tuple[PointSource, str | None], ...]

    def points(self) -> list[BoundaryPoint]:
        out = [BoundaryPoint((float(p[0]), float(p[1])), s, Side.LEFT, o) for p, (s, o) in zip(self.left, self.left_src)]
        out += [BoundaryPoint((float(p[0]), float(p[1])), s, Side.RIGHT, o)
                for p, (s, o) in zip(self.right, self.right_src)]
        return out


@dataclass(frozen=True)
class CorridorStep:
    path_pose: Pose2
    left: HalfPlane
    right: HalfPlane
    reference: tuple[float, float, float] | None = None
    left_source: PointSource = PointSource.LANE
    right_source: PointSource = PointSource.LANE

    @property
    def has_reference(self) -> bool:
        return self.reference is not None

    def width(self) -> float:
        """Distance between the two parallel lines."""
        return self.left.gamma + self.right.gamma if _antiparallel(self.left, self.right) else float("nan")

    def clearance(self, xy) -> tuple[float, float]:
        """Signed distance inside each line (positive = satisfied)."""
        return -self.left.value(xy), -self.right.value(xy)


def _antiparallel(a: HalfPlane, b: HalfPlane) -> bool:
    return abs(a.alpha + b.alpha) < 1e-12 and abs(a.beta + b.beta) < 1e-12


@dataclass(frozen=True, eq=False)
class Corridor:
    steps: tuple[CorridorStep, ...]
    candidates: tuple[PoseCandidates, ...]
    sigma_buffer: float = SIGMA_BUFFER
    narrow_steps: tuple[int, ...] = field(default=())  # width below vehicle width + 2 sigma

    def __len__(self) -> int:
        return len(self.steps)

    def coefficients(self) -> np.ndarray:
        """(n, 6) array of alpha_l, beta_l, gamma_l, alpha_r, beta_r, gamma_r."""
        return np.array([s.left.as_tuple() + s.right.as_tuple() for s in self.steps]).reshape(-1, 6)

    def to_dict(self) -> dict:
        return {
            "sigma_buffer": self.sigma_buffer,
            "narrow_steps": list(self.narrow_steps),
            "steps": [
                {"x": s.path_pose.x, "y": s.path_pose.y, "heading": s.path_pose.heading,
                 "left": list(s.left.as_tuple()), "right": list(s.right.as_tuple()),
                 "reference": list(s.reference) if s.reference else None}
                for s in self.steps
            ],
        }


# -- classification -------------------------------------------------------------

def _context_boundaries(rmap: RoadMap, pt: PathPoint) -> list[int]:
    """Boundary indices relevant to a pose: its own lane when lane-following,
    otherwise the outer boundaries of its lane plus legal neighbouring lanes."""
    lane = pt.lane_id
    if lane not in rmap.lane_boundaries:
        raise MissingBoundaryContext(f"path pose at s={pt.s:.2f} references unknown lane {lane!r}")
    left, right = rmap.lane_boundaries[lane]
    if left is None or right is None:
        raise MissingBoundaryContext(f"lane {lane!r} lacks a left/right boundary pair")
    if pt.on_lane_follow:
        return [left, right]
    lanes = {lane}
    for other in rmap.lanes:
        if other != lane and rmap.lane_adjacent(lane, other) and manoeuvre_is_legal(rmap, lane, other):
            lanes.add(other)
    out = set()
    for ln in lanes:
        for b in rmap.lane_boundaries[ln]:
            if b is None:
                continue
            bd = rmap.boundaries[b]
            if bd.left_lane in lanes and bd.right_lane in lanes:
                continue  # lane line between two usable lanes
            out.add(b)
    return sorted(out)


def obstacle_points(obstacles: ObstacleSet, spacing: float = OBSTACLE_POINT_SPACING):
    """Polygon vertices plus extra points along long edges; returns (xy, ids)."""
    pts, ids = [], []
    for o in obstacles:
        v = o.vertices
        for i in range(len(v)):
            a, b = v[i], v[(i + 1) % len(v)]
            n = max(1, int(np.ceil(np.linalg.norm(b - a) / spacing)))
            for k in range(n):
                pts.append(a + (b - a) * (k / n))
                ids.append(o.id)
    return np.array(pts, dtype=float).reshape(-1, 2), ids


def _along(xy: np.ndarray, s: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Arc length of the projection of points ``q`` onto the polyline ``xy``,
    extended linearly past both ends."""
    if len(xy) == 1:
        return np.full(len(q), s[0])
    a, b = xy[:-1], xy[1:]
    ab = b - a
    L2 = np.maximum((ab * ab).sum(axis=1), 1e-12)
    rel = q[:, None, :] - a[None, :, :]
    t = (rel * ab[None]).sum(axis=2) / L2[None]
    tc = np.clip(t, 0.0, 1.0)
    d = np.hypot(*(rel - tc[..., None] * ab[None]).transpose(2, 0, 1))
    i = np.argmin(d, axis=1)
    ti = t[np.arange(len(q)), i]
    # allow extrapolation only on the end segments
    ti = np.where((i > 0) & (ti < 0), 0.0, ti)
    ti = np.where((i < len(ab) - 1) & (ti > 1), 1.0, ti)
    return s[i] + ti * (s[i + 1] - s[i])


def classify_boundary_points(
    path: PlannedPath | Sequence[PathPoint],
    rmap: RoadMap,
    obstacles: ObstacleSet,
    lookahead: float = LOOKAHEAD,
    lookbehind: float = LOOKBEHIND,
    along: PlannedPath | None = None,
) -> list[PoseCandidates]:
    """Split nearby boundary and obstacle points into left/right sets for every pose.

    ``along`` optionally supplies a longer path used to measure obstacle arc
    lengths (useful when ``path`` is a short horizon window).
    """
    pts = list(path.points if isinstance(path, PlannedPath) else path)
    ref = along.points if along is not None else pts
    ref_xy = np.array([[p.pose.x, p.pose.y] for p in ref]).reshape(-1, 2)
    ref_s = np.array([p.s for p in ref])
    obs_xy, obs_ids = obstacle_points(obstacles)
    obs_s = _along(ref_xy, ref_s, obs_xy) if len(obs_xy) else np.zeros(0)
    out = []
    for pt in pts:
        pose = pt.pose
        c, s = np.cos(pose.heading), np.sin(pose.heading)
        cand_xy, cand_src = [], []
        for b in _context_boundaries(rmap, pt):
            idx = rmap.boundary_trees[b].query_ball_point((pose.x, pose.y), BOUNDARY_RADIUS)
            if not idx:
                continue
            idx = np.sort(np.asarray(idx))
            cand_xy.append(rmap.boundaries[b].polyline.points[idx])
            src = PointSource.ROAD if rmap.boundaries[b].tag == BoundaryTag.ROAD else PointSource.LANE
            cand_src.extend([(src, None)] * len(idx))
        if len(obs_xy):
            win = np.nonzero((obs_s >= pt.s - lookbehind) & (obs_s <= pt.s + lookahead))[0]
            cand_xy.append(obs_xy[win])
            cand_src.extend([(PointSource.OBSTACLE, obs_ids[i]) for i in win])
        xy = np.vstack(cand_xy) if cand_xy else np.zeros((0, 2))
        cross = c * (xy[:, 1] - pose.y) - s * (xy[:, 0] - pose.x)
        is_left = cross >= SIDE_EPS  # On and Right both go right
        li, ri = np.nonzero(is_left)[0], np.nonzero(~is_left)[0]
        out.append(PoseCandidates(xy[li], xy[ri], tuple(cand_src[i] for i in li), tuple(cand_src[i] for i in ri)))
    return out


# -- line construction ----------------------------------------------------------

def _lines(positions: np.ndarray, candidates: Sequence[PoseCandidates], headings: np.ndarray | None = None):
    """Nearest-point lines per step; tangents from finite differences unless given."""
    th = finite_difference_tangents(positions) if headings is None else headings
    rows = []
    for k, (p, cand) in enumerate(zip(positions, candidates)):
        if not len(cand.left) or not len(cand.right):
            raise DegenerateCorridor("no boundary candidate on one side", k)
        t = np.array([np.cos(th[k]), np.sin(th[k])])
        nl = np.array([-t[1], t[0]])
        il = int(np.argmin(np.hypot(*(cand.left - p).T)))
        ir = int(np.argmin(np.hypot(*(cand.right - p).T)))
        ql, qr = cand.left[il], cand.right[ir]
        left = HalfPlane(float(nl[0]), float(nl[1]), float(nl @ ql))
        right = HalfPlane(float(-nl[0]), float(-nl[1]), float(-nl @ qr))
        if left.gamma + right.gamma <= 0.0:
            raise DegenerateCorridor("left and right lines leave no interior", k)
        rows.append((th[k], left, right, cand.left_src[il][0], cand.right_src[ir][0]))
    return rows


def build_corridor(
    path: PlannedPath | Sequence[PathPoint],
    classified: Sequence[PoseCandidates],
    sigma_buffer: float = SIGMA_BUFFER,
    horizon: int | None = None,
    v_ref: float | Sequence[float] | None = None,
    vehicle_width: float = 1.8,
    terminal_reference: bool = False,
) -> Corridor:
    """One CorridorStep per path pose (truncated to ``horizon``).

    A tracking reference (the pose position and ``v_ref``) is attached only to
    poses on lane-following lattice edges. With ``terminal_reference`` the last
    step also gets one: it is the destination, which sits on a lane centreline.
    """
    pts = list(path.points if isinstance(path, PlannedPath) else path)
    n = len(pts) if horizon is None else min(len(pts), horizon)
    pts, classified = pts[:n], list(classified[:n])
    pos = np.array([[p.pose.x, p.pose.y] for p in pts]).reshape(-1, 2)
    heads = None if n >= 2 else np.array([p.pose.heading for p in pts])
    if v_ref is None:
        vr = [0.0] * n
    elif np.ndim(v_ref) == 0:
        vr = [float(v_ref)] * n
    else:
        vr = [float(v) for v in v_ref][:n]
    steps, narrow = [], []
    for k, (pt, (th, left, right, ls, rs)) in enumerate(zip(pts, _lines(pos, classified, heads))):
        on_ref = pt.on_lane_follow or (terminal_reference and k == n - 1)
        ref = (pt.pose.x, pt.pose.y, vr[k]) if on_ref else None
        step = CorridorStep(Pose2(pt.pose.x, pt.pose.y, th), left, right, ref, ls, rs)
        if left.gamma + right.gamma < vehicle_width + 2 * sigma_buffer:
            narrow.append(k)
        steps.append(step)
    return Corridor(tuple(steps), tuple(classified), sigma_buffer, tuple(narrow))


def relinearize(corridor: Corridor, trajectory, vehicle_width: float = 1.8) -> Corridor:
    """Rebuild the lines around new positions, reusing the stored side-split candidates.

    ``trajectory`` is an (n, >=2) array of positions (extra columns ignored) or
    a sequence of objects with ``x`` and ``y`` attributes.
    """
    if isinstance(trajectory, np.ndarray):
        pos = np.asarray(trajectory, dtype=float)[:, :2]
    else:
        pos = np.array([[s.x, s.y] for s in trajectory], dtype=float).reshape(-1, 2)
    if len(pos) != len(corridor):
        raise ValueError(f"trajectory has {len(pos)} points, corridor has {len(corridor)} steps")
    heads = None if len(pos) >= 2 else np.array([corridor.steps[0].path_pose.heading])
    steps, narrow = [], []
    for k, (old, (th, left, right, ls, rs)) in enumerate(zip(corridor.steps, _lines(pos, corridor.candidates, heads))):
        steps.append(CorridorStep(Pose2(pos[k, 0], pos[k, 1], th), left, right, old.reference, ls, rs))
        if left.gamma + right.gamma < vehicle_width + 2 * corridor.sigma_buffer:
            narrow.append(k)
    return Corridor(tuple(steps), corridor.candidates, corridor.sigma_buffer, tuple(narrow))
