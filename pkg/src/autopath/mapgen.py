"""Procedural multi-lane road maps in the ``autopath-map/1`` format."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .roadmap import MAP_VERSION


@dataclass(frozen=True)
class Straight:
    length: float


@dataclass(frozen=True)
class Arc:
    radius: float
    angle: float  # radians, positive = left turn


class Centreline:
    """Piecewise straight/arc reference line evaluated analytically by arc length."""

    def __init__(self, pieces: Sequence[Straight | Arc], origin=(0.0, 0.0), heading: float = 0.0):
        self.pieces = list(pieces)
        self._starts = []
        x, y, th, s = float(origin[0]), float(origin[1]), float(heading), 0.0
        for p in self.pieces:
            self._starts.append((s, x, y, th))
            if isinstance(p, Straight):
                x += p.length * math.cos(th)
                y += p.length * math.sin(th)
                s += p.length
            else:
                sgn = math.copysign(1.0, p.angle)
                cx, cy = x - sgn * p.radius * math.sin(th), y + sgn * p.radius * math.cos(th)
                th2 = th + p.angle
                x, y = cx + sgn * p.radius * math.sin(th2), cy - sgn * p.radius * math.cos(th2)
                th = th2
                s += p.radius * abs(p.angle)
        self.length = s

    def pose(self, s: float) -> tuple[float, float, float]:
        s = min(max(s, 0.0), self.length)
        k = len(self._starts) - 1
        while k > 0 and self._starts[k][0] > s:
            k -= 1
        s0, x, y, th = self._starts[k]
        p = self.pieces[k]
        ds = s - s0
        if isinstance(p, Straight):
            return x + ds * math.cos(th), y + ds * math.sin(th), th
        sgn = math.copysign(1.0, p.angle)
        dth = sgn * ds / p.radius
        cx, cy = x - sgn * p.radius * math.sin(th), y + sgn * p.radius * math.cos(th)
        th2 = th + dth
        return cx + sgn * p.radius * math.sin(th2), cy - sgn * p.radius * math.cos(th2), th2


def generate_map(
    pieces: Sequence[Straight | Arc],
    n_lanes: int = 2,
    lane_width: float = 3.7,
    node_spacing: float = 2.0,
    boundary_spacing: float = 1.0,
    lane_change_spans: Sequence[int] = (6, 8, 10),
    origin=(0.0, 0.0),
    heading: float = 0.0,
    name: str = "generated",
) -> dict:
    """Build a map document for ``n_lanes`` same-direction lanes along a centreline.

    Lane ``"0"`` is the rightmost. Lane-change edges join node ``j`` to node
    ``j + span`` of each neighbouring lane for every span in ``lane_change_spans``.
    """
    ref = Centreline(pieces, origin, heading)
    n_nodes = int(math.floor(ref.length / node_spacing + 1e-9)) + 1
    offsets = [(i - (n_lanes - 1) / 2.0) * lane_width for i in range(n_lanes)]

    def at(s, off):
        x, y, th = ref.pose(s)
        return x - off * math.sin(th), y + off * math.cos(th), th

    nodes, ids = [], {}
    nid = 0
    for lane, off in enumerate(offsets):
        for j in range(n_nodes):
            x, y, th = at(j * node_spacing, off)
            nodes.append({"id": nid, "x": x, "y": y, "heading": th, "lane_id": str(lane)})
            ids[(lane, j)] = nid
            nid += 1

    edges = []
    for lane in range(n_lanes):
        for j in range(n_nodes - 1):
            edges.append({"from": ids[(lane, j)], "to": ids[(lane, j + 1)], "kind": "lane_follow"})
    for lane in range(n_lanes):
        for other in (lane - 1, lane + 1):
            if not 0 <= other < n_lanes:
                continue
            for span in lane_change_spans:
                for j in range(n_nodes - span):
                    edges.append({"from": ids[(lane, j)], "to": ids[(other, j + span)], "kind": "lane_change"})

    n_b = int(math.floor(ref.length / boundary_spacing + 1e-9)) + 1
    s_b = np.linspace(0.0, (n_b - 1) * boundary_spacing, n_b)
    if ref.length - s_b[-1] > 1e-6:
        s_b = np.append(s_b, ref.length)
    boundaries = []
    for k in range(n_lanes + 1):
        off = (k - n_lanes / 2.0) * lane_width
        pts = [list(at(s, off)[:2]) for s in s_b]
        right_lane = str(k - 1) if k - 1 >= 0 else None  # lane on the boundary's right
        left_lane = str(k) if k < n_lanes else None
        tag = "road" if k in (0, n_lanes) else "lane"
        boundaries.append({"tag": tag, "points": pts, "left_lane": left_lane, "right_lane": right_lane})

    legality = []
    for a in range(n_lanes):
        for b in range(n_lanes):
            if a != b:
                legality.append({"from": str(a), "to": str(b), "allowed": abs(a - b) == 1})

    return {
        "meta": {"version": MAP_VERSION, "name": name, "lane_width": lane_width, "node_spacing": node_spacing},
        "nodes": nodes,
        "edges": edges,
        "boundaries": boundaries,
        "legality": legality,
    }


def desk_map() -> dict:
    """~210 m two-lane road: 150 m straight, gentle 30 degree left curve, 20 m straight."""
    return generate_map([Straight(150.0), Arc(80.0, math.radians(30.0)), Straight(20.0)], name="desk")


def straight_map(length: float = 200.0, n_lanes: int = 2) -> dict:
    return generate_map([Straight(length)], n_lanes=n_lanes, name=f"straight{int(length)}")
