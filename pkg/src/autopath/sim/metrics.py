"""Clearance and vehicle-dynamics metrics extracted from a plant trace."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..collision import ObstacleSet, VehicleFootprint, poses_collision
from ..geometry import point_segment_distance, points_to_polygon_distance
from .plant import PlantParams


def _edges(v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return v, np.roll(v, -1, axis=-2)


def footprint_corners(xy: np.ndarray, heading: np.ndarray, fp: VehicleFootprint) -> np.ndarray:
    """(T, 4, 2) footprint corners for T rear-axle poses."""
    c, s = np.cos(heading), np.sin(heading)
    cx = xy[:, 0] + fp.rear_axle_to_center * c
    cy = xy[:, 1] + fp.rear_axle_to_center * s
    hl, hw = fp.length / 2, fp.width / 2
    local = np.array([[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]])
    x = cx[:, None] + local[None, :, 0] * c[:, None] - local[None, :, 1] * s[:, None]
    y = cy[:, None] + local[None, :, 0] * s[:, None] + local[None, :, 1] * c[:, None]
    return np.stack([x, y], axis=-1)


def clearance_series(xy: np.ndarray, obstacles: ObstacleSet) -> np.ndarray:
    """Per-sample distance from the vehicle reference point (rear axle) to the nearest obstacle.

    This is the point the corridor constrains, so it measures how well the
    corridor approximates the free space. Zero inside an obstacle.
    """
    xy = np.asarray(xy, float).reshape(-1, 2)
    out = np.full(len(xy), np.inf)
    for poly in obstacles:
        out = np.minimum(out, points_to_polygon_distance(xy, poly.vertices))
    return out


def footprint_clearance_series(xy: np.ndarray, heading: np.ndarray, obstacles: ObstacleSet,
                               footprint: VehicleFootprint | None = None) -> np.ndarray:
    """Per-sample distance between the vehicle footprint and the nearest obstacle (0 on contact)."""
    fp = footprint or VehicleFootprint()
    xy = np.asarray(xy, float).reshape(-1, 2)
    heading = np.asarray(heading, float).reshape(-1)
    out = np.full(len(xy), np.inf)
    if not len(obstacles) or not len(xy):
        return out
    corners = footprint_corners(xy, heading, fp)
    fa, fb = _edges(corners)
    for poly in obstacles:
        v = poly.vertices
        oa, ob = _edges(v)
        # footprint corners against obstacle edges, obstacle vertices against footprint edges
        d1 = point_segment_distance(corners[:, :, None, :], oa[None, None], ob[None, None]).min(axis=(1, 2))
        d2 = point_segment_distance(v[None, :, None, :], fa[:, None], fb[:, None]).min(axis=(1, 2))
        out = np.minimum(out, np.minimum(d1, d2))
    hit, _ = poses_collision(xy, heading, fp, obstacles, 0.0)
    out[hit] = 0.0
    return out


@dataclass
class RunMetrics:
    success: bool
    reason: str
    min_obstacle_distance: float
    min_footprint_clearance: float
    max_long_accel: float
    max_long_jerk: float
    max_lat_accel: float
    max_steering_angle: float
    max_steering_rate: float
    path_length: float
    duration: float
    collisions: int = 0
    violations: list[str] = field(default_factory=list)
    replans: int = 0
    fallbacks: int = 0
    ticks: int = 0
    mean_scp_time: float = 0.0
    timing: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def dynamics_maxima(t: np.ndarray, v: np.ndarray, psi: np.ndarray, a: np.ndarray, p: PlantParams) -> dict:
    """Maxima over the trace: jerk and steering rate by finite differences at plant rate."""
    dt = np.diff(t)
    jerk = np.abs(np.diff(a)) / dt if len(a) > 1 else np.zeros(0)
    rate = np.abs(np.diff(psi)) / dt if len(psi) > 1 else np.zeros(0)
    lat = v ** 2 * np.abs(np.tan(psi)) / p.l

    def mx(x):
        return float(np.max(x)) if len(x) else 0.0

    return {
        "max_long_accel": mx(np.abs(a)),
        "max_long_jerk": mx(jerk),
        "max_lat_accel": mx(lat),
        "max_steering_angle": mx(np.abs(psi)),
        "max_steering_rate": mx(rate),
    }


def limit_violations(m: dict, p: PlantParams) -> list[str]:
    limits = {"max_long_accel": p.a_max, "max_long_jerk": p.jerk_max, "max_lat_accel": p.lat_accel_max,
              "max_steering_angle": p.psi_max}
    return [f"{k}={m[k]:.4g}>{lim}" for k, lim in limits.items() if m[k] > lim]


def path_length(xy: np.ndarray) -> float:
    xy = np.asarray(xy, float).reshape(-1, 2)
    return float(np.hypot(*np.diff(xy, axis=0).T).sum()) if len(xy) > 1 else 0.0


def finite_or_none(x: float):
    return x if math.isfinite(x) else None
