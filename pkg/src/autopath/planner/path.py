from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..geometry import Polyline, Pose2, finite_difference_tangents


@dataclass(frozen=True)
class PathPoint:
    pose: Pose2
    s: float
    source: str  # lattice | free | start | goal
    anchor: int  # lattice node whose lane boundaries apply
    lane_id: str
    edge_kind: str  # lane_follow | lane_change | free
    node: int  # search node the pose is attributed to

    @property
    def on_lane_follow(self) -> bool:
        return self.edge_kind == "lane_follow"


@dataclass(frozen=True)
class PlannedPath:
    """Solution path resampled at fixed arc-length spacing, with per-pose map context."""

    points: tuple[PathPoint, ...]
    cost: float
    edges: tuple[tuple[int, int], ...] = ()
    spacing: float = 1.0
    stats: dict = field(default_factory=dict, compare=False)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def poses(self) -> list[Pose2]:
        return [p.pose for p in self.points]

    @property
    def xy(self) -> np.ndarray:
        return np.array([[p.pose.x, p.pose.y] for p in self.points])

    @property
    def length(self) -> float:
        return self.points[-1].s if self.points else 0.0

    def polyline(self) -> Polyline:
        return Polyline(self.xy)

    def project(self, xy) -> tuple[float, float, int]:
        """Arc length, signed lateral offset (left positive) and segment index of the closest point."""
        pts = self.xy
        a, b = pts[:-1], pts[1:]
        ab = b - a
        L2 = np.maximum(np.sum(ab * ab, axis=1), 1e-12)
        p = np.asarray(xy, dtype=float)
        t = np.clip(np.sum((p - a) * ab, axis=1) / L2, 0.0, 1.0)
        closest = a + ab * t[:, None]
        d = np.hypot(*(p - closest).T)
        i = int(np.argmin(d))
        s = self.points[i].s + t[i] * (self.points[i + 1].s - self.points[i].s)
        cross = ab[i, 0] * (p[1] - a[i, 1]) - ab[i, 1] * (p[0] - a[i, 0])
        return float(s), float(np.sign(cross) * d[i]), i

    def window(self, s0: float, n: int, spacing: float) -> list[PathPoint]:
        """Points at arc lengths ``s0 + k*spacing`` for k = 1..n, truncated at the path end.

        Positions are linearly interpolated; context is taken from the nearer
        stored point.
        """
        if len(self.points) < 2:
            return []
        s_all = np.array([p.s for p in self.points])
        pts = self.xy
        out = []
        for k in range(1, n + 1):
            s = s0 + k * spacing
            if s > s_all[-1] + 1e-9:
                break
            i = int(np.clip(np.searchsorted(s_all, s, side="right") - 1, 0, len(s_all) - 2))
            f = (s - s_all[i]) / max(s_all[i + 1] - s_all[i], 1e-12)
            xy = pts[i] + f * (pts[i + 1] - pts[i])
            src = self.points[i] if f < 0.5 else self.points[i + 1]
            h = np.arctan2(*(pts[i + 1] - pts[i])[::-1])
            out.append(PathPoint(Pose2(xy[0], xy[1], h), float(s), src.source, src.anchor, src.lane_id,
                                 src.edge_kind, src.node))
        return out

    def to_dict(self) -> dict:
        return {
            "cost": self.cost,
            "spacing": self.spacing,
            "edges": [list(e) for e in self.edges],
            "points": [
                {"x": p.pose.x, "y": p.pose.y, "heading": p.pose.heading, "s": p.s, "source": p.source,
                 "anchor": p.anchor, "lane_id": p.lane_id, "edge_kind": p.edge_kind, "node": p.node}
                for p in self.points
            ],
            "stats": {k: v for k, v in self.stats.items() if isinstance(v, (int, float, str, bool))},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PlannedPath":
        pts = tuple(
            PathPoint(Pose2(p["x"], p["y"], p["heading"]), p["s"], p["source"], p["anchor"], p["lane_id"],
                      p["edge_kind"], p["node"])
            for p in d["points"]
        )
        return cls(pts, d["cost"], tuple(tuple(e) for e in d["edges"]), d.get("spacing", 1.0), d.get("stats", {}))


def tangents_of(points) -> np.ndarray:
    return finite_difference_tangents(np.array([[p.pose.x, p.pose.y] for p in points]))
