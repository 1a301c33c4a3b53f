"""2-D geometric primitives: poses, polylines, polygons and Hermite splines."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence, Union

import numpy as np

from .errors import DegenerateEndpoints

SIDE_EPS = 1e-9
SPLINE_SPACING = 0.25
_TWO_PI = 2.0 * math.pi

# 5-point Gauss-Legendre rule on [0, 1]
_GL_X, _GL_W = np.polynomial.legendre.leggauss(5)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


def wrap_angle(a: float) -> float:
    """Map an angle to (-pi, pi]."""
    w = math.remainder(a, _TWO_PI)
    if w <= -math.pi:
        w += _TWO_PI
    return w


def wrap_angles(a: np.ndarray) -> np.ndarray:
    w = np.remainder(np.asarray(a, dtype=float) + math.pi, _TWO_PI) - math.pi
    return np.where(w <= -math.pi, w + _TWO_PI, w)


class Side(enum.Enum):
    LEFT = "left"
    RIGHT = "right"
    ON = "on"


@dataclass(frozen=True)
class Pose2:
    x: float
    y: float
    heading: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "heading", wrap_angle(float(self.heading)))

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y])

    @property
    def direction(self) -> np.ndarray:
        return np.array([math.cos(self.heading), math.sin(self.heading)])

    def distance_to(self, other: "Pose2 | Sequence[float]") -> float:
        if isinstance(other, Pose2):
            return math.hypot(other.x - self.x, other.y - self.y)
        return math.hypot(other[0] - self.x, other[1] - self.y)

    def reversed(self) -> "Pose2":
        return Pose2(self.x, self.y, self.heading + math.pi)

    def to_dict(self) -> dict:
        return {"x": self.x, "y": self.y, "heading": self.heading}

    @classmethod
    def from_dict(cls, d: dict) -> "Pose2":
        return cls(d["x"], d["y"], d.get("heading", 0.0))


def side_of_path(point: Sequence[float], path_point: Pose2, eps: float = SIDE_EPS) -> Side:
    """Classify ``point`` as left/right of the directed line through ``path_point``."""
    c = math.cos(path_point.heading) * (point[1] - path_point.y) - math.sin(path_point.heading) * (
        point[0] - path_point.x
    )
    if c > eps:
        return Side.LEFT
    if c < -eps:
        return Side.RIGHT
    return Side.ON


def signed_offsets(points: np.ndarray, pose: Pose2) -> np.ndarray:
    """Vectorised cross products used by :func:`side_of_path` (positive = left)."""
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    return math.cos(pose.heading) * (p[:, 1] - pose.y) - math.sin(pose.heading) * (p[:, 0] - pose.x)


@dataclass(frozen=True, eq=False)
class Polyline:
    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).reshape(-1, 2)
        if len(pts) < 2:
            raise ValueError("polyline needs at least two points")
        gaps = np.hypot(*np.diff(pts, axis=0).T)
        if np.any(gaps <= 1e-9):
            raise ValueError(f"polyline has coincident consecutive points at index {int(np.argmin(gaps))}")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.points)

    @cached_property
    def cumulative_length(self) -> np.ndarray:
        seg = np.hypot(*np.diff(self.points, axis=0).T)
        return np.concatenate([[0.0], np.cumsum(seg)])

    @property
    def length(self) -> float:
        return float(self.cumulative_length[-1])

    def interpolate(self, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Positions and tangent headings at arc lengths ``s`` (clipped to the curve)."""
        cum = self.cumulative_length
        s = np.clip(np.asarray(s, dtype=float), 0.0, cum[-1])
        idx = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(cum) - 2)
        seg = self.points[idx + 1] - self.points[idx]
        seg_len = cum[idx + 1] - cum[idx]
        frac = (s - cum[idx]) / seg_len
        pos = self.points[idx] + seg * frac[:, None]
        return pos, np.arctan2(seg[:, 1], seg[:, 0])


def polygon_signed_area(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _segments_cross(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 * d2 < 0 and d3 * d4 < 0:
        return True

    def on_seg(a, b, c):
        return min(a[0], b[0]) - 1e-12 <= c[0] <= max(a[0], b[0]) + 1e-12 and min(a[1], b[1]) - 1e-12 <= c[
            1
        ] <= max(a[1], b[1]) + 1e-12

    return (
        (abs(d1) < 1e-12 and on_seg(q1, q2, p1))
        or (abs(d2) < 1e-12 and on_seg(q1, q2, p2))
        or (abs(d3) < 1e-12 and on_seg(p1, p2, q1))
        or (abs(d4) < 1e-12 and on_seg(p1, p2, q2))
    )


def is_simple_polygon(v: np.ndarray) -> bool:
    n = len(v)
    for i in range(n):
        a1, a2 = v[i], v[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or j == (i + 1) % n:
                continue
            if _segments_cross(a1, a2, v[j], v[(j + 1) % n]):
                return False
    return True


def is_convex_ccw(v: np.ndarray) -> bool:
    e = np.roll(v, -1, axis=0) - v
    cross = e[:, 0] * np.roll(e[:, 1], -1) - e[:, 1] * np.roll(e[:, 0], -1)
    return bool(np.all(cross >= -1e-12))


def ear_clip(v: np.ndarray) -> list[np.ndarray]:
    """Triangulate a simple CCW polygon by ear clipping."""
    idx = list(range(len(v)))
    tris = []

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    guard = 0
    while len(idx) > 3 and guard < 10 * len(v) ** 2:
        guard += 1
        n = len(idx)
        for k in range(n):
            i0, i1, i2 = idx[(k - 1) % n], idx[k], idx[(k + 1) % n]
            a, b, c = v[i0], v[i1], v[i2]
            if cross(a, b, c) <= 1e-14:
                continue
            inside = False
            for j in idx:
                if j in (i0, i1, i2):
                    continue
                p = v[j]
                if cross(a, b, p) >= 0 and cross(b, c, p) >= 0 and cross(c, a, p) >= 0:
                    inside = True
                    break
            if not inside:
                tris.append(np.array([a, b, c]))
                idx.pop(k)
                break
    tris.append(v[idx])
    return tris


@dataclass(frozen=True, eq=False)
class PolygonObstacle:
    """Simple polygon obstacle; vertices are stored counter-clockwise."""

    vertices: np.ndarray
    id: str = ""

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float).reshape(-1, 2)
        if len(v) < 3:
            raise ValueError(f"obstacle {self.id!r}: need at least 3 vertices")
        area = polygon_signed_area(v)
        if abs(area) < 1e-12:
            raise ValueError(f"obstacle {self.id!r}: zero area")
        if area < 0:
            v = v[::-1].copy()
        if not is_simple_polygon(v):
            raise ValueError(f"obstacle {self.id!r}: polygon self-intersects")
        v.flags.writeable = False
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "id", str(self.id))

    @classmethod
    def box(cls, center, length: float, width: float, heading: float = 0.0, id: str = "") -> "PolygonObstacle":
        c, s = math.cos(heading), math.sin(heading)
        hl, hw = length / 2.0, width / 2.0
        local = np.array([[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]])
        rot = np.array([[c, -s], [s, c]])
        return cls(local @ rot.T + np.asarray(center, dtype=float), id)

    @classmethod
    def regular(cls, center, radius: float, sides: int = 8, id: str = "") -> "PolygonObstacle":
        ang = np.arange(sides) * (2 * math.pi / sides) + math.pi / sides
        pts = np.column_stack([np.cos(ang), np.sin(ang)]) * radius + np.asarray(center, dtype=float)
        return cls(pts, id)

    @cached_property
    def bbox(self) -> tuple[float, float, float, float]:
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])

    @cached_property
    def centroid(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    @cached_property
    def convex_parts(self) -> list[np.ndarray]:
        if is_convex_ccw(self.vertices):
            return [self.vertices]
        return ear_clip(self.vertices)

    def translated(self, dx: float, dy: float) -> "PolygonObstacle":
        return PolygonObstacle(self.vertices + np.array([dx, dy]), self.id)

    def contains(self, point: Sequence[float]) -> bool:
        return point_in_polygon(point, self.vertices)


def point_segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distances from points ``p`` (..., 2) to segments a->b (broadcast)."""
    ab = b - a
    ap = p - a
    denom = np.sum(ab * ab, axis=-1)
    t = np.clip(np.sum(ap * ab, axis=-1) / np.where(denom > 0, denom, 1.0), 0.0, 1.0)
    closest = a + ab * t[..., None]
    return np.hypot(*(p - closest).T) if np.ndim(p) == 1 else np.linalg.norm(p - closest, axis=-1)


def point_in_polygon(point: Sequence[float], vertices: np.ndarray) -> bool:
    """Ray casting; points on the boundary count as inside."""
    px, py = float(point[0]), float(point[1])
    v = vertices
    a, b = v, np.roll(v, -1, axis=0)
    d = point_segment_distance(np.array([px, py]), a, b)
    if np.min(d) <= 1e-12:
        return True
    inside = False
    n = len(v)
    for i in range(n):
        x1, y1 = v[i]
        x2, y2 = v[(i + 1) % n]
        if (y1 > py) != (y2 > py):
            xin = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
            if px < xin:
                inside = not inside
    return inside


def min_distance_polygon(point: Sequence[float], obstacle: PolygonObstacle) -> float:
    """Euclidean distance from ``point`` to the obstacle; zero inside or on the boundary."""
    if point_in_polygon(point, obstacle.vertices):
        return 0.0
    v = obstacle.vertices
    d = point_segment_distance(np.asarray(point, dtype=float), v, np.roll(v, -1, axis=0))
    return float(np.min(d))


def points_to_polygon_distance(points: np.ndarray, vertices: np.ndarray) -> np.ndarray:
    """Vectorised :func:`min_distance_polygon` for many points against one polygon."""
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    a = vertices[None, :, :]
    b = np.roll(vertices, -1, axis=0)[None, :, :]
    d = point_segment_distance(p[:, None, :], a, b).min(axis=1)
    # even-odd crossing count for interior points
    x1, y1 = vertices[:, 0][None, :], vertices[:, 1][None, :]
    x2, y2 = np.roll(vertices[:, 0], -1)[None, :], np.roll(vertices[:, 1], -1)[None, :]
    px, py = p[:, 0:1], p[:, 1:2]
    straddle = (y1 > py) != (y2 > py)
    with np.errstate(divide="ignore", invalid="ignore"):
        xin = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
    crossings = np.sum(straddle & (px < xin), axis=1)
    inside = (crossings % 2 == 1) | (d <= 1e-12)
    return np.where(inside, 0.0, d)


class HermiteSpline:
    """Cubic Hermite curve between two poses.

    Endpoint tangents follow the pose headings with magnitude ``tangent_scale``
    (default: the endpoint separation). Arc-length samples at ``spacing`` are
    computed on first use and cached.
    """

    def __init__(self, start: Pose2, end: Pose2, tangent_scale: float | None = None,
                 spacing: float = SPLINE_SPACING):
        sep = start.distance_to(end)
        if sep <= 1e-6:
            raise DegenerateEndpoints(f"endpoints {start} and {end} coincide")
        self.start = start
        self.end = end
        self.tangent_scale = float(sep if tangent_scale is None else tangent_scale)
        self.spacing = float(spacing)
        m0 = self.tangent_scale * start.direction
        m1 = self.tangent_scale * end.direction
        p0, p1 = start.xy, end.xy
        # power-basis coefficients: p(t) = c0 + c1 t + c2 t^2 + c3 t^3
        self._p = np.array([p0, m0, -3 * p0 - 2 * m0 + 3 * p1 - m1, 2 * p0 + m0 - 2 * p1 + m1])

    def point(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        c = self._p
        return c[0] + np.multiply.outer(t, c[1]) + np.multiply.outer(t * t, c[2]) + np.multiply.outer(t ** 3, c[3])

    def derivative(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        c = self._p
        return c[1] + np.multiply.outer(2 * t, c[2]) + np.multiply.outer(3 * t * t, c[3])

    def second_derivative(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        c = self._p
        return 2 * c[2] + np.multiply.outer(6 * t, c[3])

    def heading(self, t) -> np.ndarray:
        d = self.derivative(t)
        return np.arctan2(d[..., 1], d[..., 0])

    @cached_property
    def _table(self) -> tuple[np.ndarray, np.ndarray]:
        chord = self.start.distance_to(self.end)
        n = max(8, int(math.ceil((chord + self.tangent_scale) / 0.5)))
        t = np.arange(n + 1) / n
        nodes = (t[:-1, None] + _GL_X[None, :] / n).ravel()
        c = self._p
        dx = c[1, 0] + nodes * (2 * c[2, 0] + 3 * c[3, 0] * nodes)
        dy = c[1, 1] + nodes * (2 * c[2, 1] + 3 * c[3, 1] * nodes)
        seg = (np.sqrt(dx * dx + dy * dy).reshape(n, -1) @ _GL_W) / n
        return t, np.concatenate([[0.0], np.cumsum(seg)])

    @property
    def length(self) -> float:
        return float(self._table[1][-1])

    def t_at(self, s) -> np.ndarray:
        t, cum = self._table
        return np.interp(np.asarray(s, dtype=float), cum, t)

    @cached_property
    def samples(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(s, xy, heading) at ``spacing`` along arc length, ending exactly at the end pose."""
        s = arclength_grid(self.length, self.spacing)
        t = self.t_at(s)
        t[0], t[-1] = 0.0, 1.0
        xy = self.point(t)
        xy[0] = self.start.xy
        xy[-1] = self.end.xy
        hd = self.heading(t)
        hd[0], hd[-1] = self.start.heading, self.end.heading
        for a in (s, xy, hd):
            a.flags.writeable = False
        return s, xy, hd

    def max_curvature(self) -> float:
        t = np.linspace(0, 1, 33)
        d1 = self.derivative(t)
        d2 = self.second_derivative(t)
        num = np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
        den = np.maximum(np.linalg.norm(d1, axis=1) ** 3, 1e-12)
        return float(np.max(num / den))

    def __repr__(self) -> str:
        return f"HermiteSpline({self.start}, {self.end})"


def hermite_connect(a: Pose2, b: Pose2, tangent_scale: float | None = None) -> HermiteSpline:
    return HermiteSpline(a, b, tangent_scale)


def arclength_grid(length: float, spacing: float) -> np.ndarray:
    """0, spacing, 2*spacing, ... plus ``length`` itself when the remainder is non-trivial."""
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    n = int(math.floor(length / spacing + 1e-9))
    s = spacing * np.arange(n + 1, dtype=float)
    tol = 1e-9 * max(1.0, length)
    if length - s[-1] > tol:
        s = np.append(s, length)
    else:
        s[-1] = length
    return s


Curve = Union[HermiteSpline, Polyline]


def resample_arclength(curve: Curve, spacing: float) -> list[Pose2]:
    """Poses every ``spacing`` metres along ``curve``; the final gap may be shorter."""
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    if isinstance(curve, HermiteSpline):
        s = arclength_grid(curve.length, spacing)
        t = curve.t_at(s)
        t[0], t[-1] = 0.0, 1.0
        xy = curve.point(t)
        hd = curve.heading(t)
        xy[0], xy[-1] = curve.start.xy, curve.end.xy
    else:
        s = arclength_grid(curve.length, spacing)
        xy, hd = curve.interpolate(s)
    return [Pose2(p[0], p[1], h) for p, h in zip(xy, hd)]


def finite_difference_tangents(xy: np.ndarray) -> np.ndarray:
    """Tangent headings of a point sequence: central differences inside, one-sided at the ends."""
    xy = np.asarray(xy, dtype=float)
    if len(xy) < 2:
        return np.zeros(len(xy))
    d = np.empty_like(xy)
    d[1:-1] = xy[2:] - xy[:-2]
    d[0] = xy[1] - xy[0]
    d[-1] = xy[-1] - xy[-2]
    return np.arctan2(d[:, 1], d[:, 0])


@dataclass(frozen=True)
class HalfPlane:
    """alpha*x + beta*y <= gamma with (alpha, beta) unit length."""

    alpha: float
    beta: float
    gamma: float

    def value(self, xy) -> float:
        return self.alpha * xy[0] + self.beta * xy[1] - self.gamma

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.alpha, self.beta, self.gamma)


@dataclass(frozen=True)
class BBox:
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def inflate(self, m: float) -> "BBox":
        return BBox(self.xmin - m, self.ymin - m, self.xmax + m, self.ymax + m)

    def contains(self, p) -> bool:
        return self.xmin <= p[0] <= self.xmax and self.ymin <= p[1] <= self.ymax

    @classmethod
    def around(cls, pts: np.ndarray) -> "BBox":
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        return cls(float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1]))


__all__ = [
    "BBox",
    "HalfPlane",
    "HermiteSpline",
    "PolygonObstacle",
    "Polyline",
    "Pose2",
    "Side",
    "arclength_grid",
    "finite_difference_tangents",
    "hermite_connect",
    "min_distance_polygon",
    "point_in_polygon",
    "points_to_polygon_distance",
    "resample_arclength",
    "side_of_path",
    "signed_offsets",
    "wrap_angle",
    "wrap_angles",
]
