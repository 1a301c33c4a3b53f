"""Footprint-vs-polygon collision checks for poses and spline edges."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .geometry import HermiteSpline, PolygonObstacle, Pose2

DEFAULT_MARGIN = 0.2
_TOUCH = 1e-9


@dataclass(frozen=True)
class VehicleFootprint:
    """Oriented rectangle; poses refer to the rear axle, the box centre sits ``rear_axle_to_center`` ahead."""

    length: float = 4.3
    width: float = 1.8
    rear_axle_to_center: float = 1.4

    def __post_init__(self):
        if min(self.length, self.width, self.rear_axle_to_center) <= 0:
            raise ValueError("footprint dimensions must be positive")

    def corners(self, pose: Pose2, margin: float = 0.0) -> np.ndarray:
        c, s = math.cos(pose.heading), math.sin(pose.heading)
        cx = pose.x + self.rear_axle_to_center * c
        cy = pose.y + self.rear_axle_to_center * s
        hl, hw = self.length / 2 + margin, self.width / 2 + margin
        local = np.array([[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]])
        return local @ np.array([[c, s], [-s, c]]) + np.array([cx, cy])


@dataclass(frozen=True)
class CollisionReport:
    clear: bool
    first_s: float | None = None
    obstacle_id: str | None = None


class _Part:
    __slots__ = ("owner", "verts", "normals", "proj_lo", "proj_hi")

    def __init__(self, owner: int, verts: np.ndarray):
        self.owner = owner
        self.verts = verts
        e = np.roll(verts, -1, axis=0) - verts
        nrm = np.column_stack([e[:, 1], -e[:, 0]])
        nrm /= np.linalg.norm(nrm, axis=1, keepdims=True)
        self.normals = nrm
        proj = verts @ nrm.T  # (m verts, m normals)
        self.proj_lo = proj.min(axis=0)
        self.proj_hi = proj.max(axis=0)


class ObstacleSet:
    """Obstacle polygons plus a bounding-box index used to prefilter queries."""

    def __init__(self, obstacles: Iterable[PolygonObstacle] = ()):
        self.obstacles: list[PolygonObstacle] = list(obstacles)
        self.bboxes = np.array([o.bbox for o in self.obstacles], dtype=float).reshape(-1, 4)
        self._parts: list[list[_Part]] = [[_Part(i, p) for p in o.convex_parts] for i, o in enumerate(self.obstacles)]

    def __len__(self) -> int:
        return len(self.obstacles)

    def __iter__(self):
        return iter(self.obstacles)

    def union(self, other: Iterable[PolygonObstacle]) -> "ObstacleSet":
        return ObstacleSet(self.obstacles + list(other))

    def query(self, bbox: Sequence[float]) -> np.ndarray:
        """Indices of obstacles whose bounding box overlaps ``bbox`` (xmin, ymin, xmax, ymax)."""
        if not len(self.obstacles):
            return np.zeros(0, dtype=int)
        b = self.bboxes
        hit = (b[:, 0] <= bbox[2]) & (b[:, 2] >= bbox[0]) & (b[:, 1] <= bbox[3]) & (b[:, 3] >= bbox[1])
        return np.nonzero(hit)[0]


def _rect_frames(xy: np.ndarray, heading: np.ndarray, fp: VehicleFootprint, margin: float):
    c, s = np.cos(heading), np.sin(heading)
    centre = xy + fp.rear_axle_to_center * np.column_stack([c, s])
    hl, hw = fp.length / 2 + margin, fp.width / 2 + margin
    return centre, c, s, hl, hw


def _sat_hits(centre, c, s, hl, hw, part: _Part) -> np.ndarray:
    """Per-sample rectangle/convex-polygon overlap (touching counts)."""
    v = part.verts
    # rectangle axes
    pu = v[:, 0][None, :] * c[:, None] + v[:, 1][None, :] * s[:, None]
    pn = -v[:, 0][None, :] * s[:, None] + v[:, 1][None, :] * c[:, None]
    cu = centre[:, 0] * c + centre[:, 1] * s
    cn = -centre[:, 0] * s + centre[:, 1] * c
    ok = (pu.max(axis=1) >= cu - hl - _TOUCH) & (pu.min(axis=1) <= cu + hl + _TOUCH)
    ok &= (pn.max(axis=1) >= cn - hw - _TOUCH) & (pn.min(axis=1) <= cn + hw + _TOUCH)
    if not ok.any():
        return ok
    # polygon edge normals
    nx, ny = part.normals[:, 0], part.normals[:, 1]
    cp = centre[:, 0:1] * nx[None, :] + centre[:, 1:2] * ny[None, :]
    rad = hl * np.abs(c[:, None] * nx[None, :] + s[:, None] * ny[None, :]) + hw * np.abs(
        -s[:, None] * nx[None, :] + c[:, None] * ny[None, :]
    )
    sep = (cp - rad > part.proj_hi[None, :] + _TOUCH) | (cp + rad < part.proj_lo[None, :] - _TOUCH)
    return ok & ~sep.any(axis=1)


def poses_collision(
    xy: np.ndarray, heading: np.ndarray, footprint: VehicleFootprint, obstacles: ObstacleSet, margin: float = 0.0,
    use_index: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised footprint check for many poses.

    Returns ``(hit, owner)``: a boolean per pose and the index of the first
    colliding obstacle (``-1`` where clear).
    """
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    heading = np.asarray(heading, dtype=float).reshape(-1)
    n = len(xy)
    hit = np.zeros(n, dtype=bool)
    owner = np.full(n, -1, dtype=int)
    if n == 0 or not len(obstacles):
        return hit, owner
    centre, c, s, hl, hw = _rect_frames(xy, heading, footprint, margin)
    ex = hl * np.abs(c) + hw * np.abs(s)
    ey = hl * np.abs(s) + hw * np.abs(c)
    lo_x, hi_x = centre[:, 0] - ex, centre[:, 0] + ex
    lo_y, hi_y = centre[:, 1] - ey, centre[:, 1] + ey
    if use_index:
        cand = obstacles.query((lo_x.min() - _TOUCH, lo_y.min() - _TOUCH, hi_x.max() + _TOUCH, hi_y.max() + _TOUCH))
    else:
        cand = np.arange(len(obstacles))
    for k in cand:
        b = obstacles.bboxes[k]
        near = (lo_x <= b[2] + _TOUCH) & (hi_x >= b[0] - _TOUCH) & (lo_y <= b[3] + _TOUCH) & (hi_y >= b[1] - _TOUCH)
        if not use_index:
            near = np.ones(n, dtype=bool)
        near &= ~hit
        if not near.any():
            continue
        idx = np.nonzero(near)[0]
        for part in obstacles._parts[k]:
            h = _sat_hits(centre[idx], c[idx], s[idx], hl, hw, part)
            if h.any():
                sel = idx[h]
                hit[sel] = True
                owner[sel] = k
                idx = idx[~h]
                if not len(idx):
                    break
    return hit, owner


def pose_in_collision(
    pose: Pose2, footprint: VehicleFootprint, obstacles: ObstacleSet, margin: float = DEFAULT_MARGIN
) -> bool:
    if margin < 0:
        raise ValueError("margin must be non-negative")
    hit, _ = poses_collision(np.array([[pose.x, pose.y]]), np.array([pose.heading]), footprint, obstacles, margin)
    return bool(hit[0])


def edge_in_collision(
    spline: HermiteSpline, footprint: VehicleFootprint, obstacles: ObstacleSet, margin: float = DEFAULT_MARGIN
) -> CollisionReport:
    """Sweep the footprint over the spline's cached arc-length samples."""
    s, xy, hd = spline.samples
    hit, owner = poses_collision(xy, hd, footprint, obstacles, margin)
    if not hit.any():
        return CollisionReport(True)
    i = int(np.argmax(hit))
    return CollisionReport(False, float(s[i]), obstacles.obstacles[owner[i]].id)
