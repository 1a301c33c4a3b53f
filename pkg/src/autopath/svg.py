"""Deterministic SVG output: plan overlays and command-versus-limit plots.

Coordinates are printed with a fixed number of decimals, so identical inputs
give byte-identical files.
"""
from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .corridor import Corridor
from .geometry import PolygonObstacle
from .planner.path import PlannedPath
from .roadmap import BoundaryTag, RoadMap

PX_PER_M = 5.0
MARGIN_M = 8.0


def _f(x: float) -> str:
    s = f"{x:.2f}"
    return "0.00" if s == "-0.00" else s


def _points(xy: np.ndarray) -> str:
    return " ".join(f"{_f(x)},{_f(y)}" for x, y in xy)


def _doc(width: float, height: float, body: list[str]) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{_f(width)}" height="{_f(height)}" '
            f'viewBox="0 0 {_f(width)} {_f(height)}">')
    return "\n".join([head, '<rect width="100%" height="100%" fill="white"/>', *body, "</svg>", ""])


def plan_svg(rmap: RoadMap, obstacles: Iterable[PolygonObstacle], path: PlannedPath | None = None,
             corridor: Corridor | None = None, title: str = "") -> str:
    """Top-down view of road boundaries, obstacles, the planned path and corridor lines."""
    obstacles = list(obstacles)
    clouds = [b.polyline.points for b in rmap.boundaries] + [o.vertices for o in obstacles]
    if path is not None and len(path):
        clouds.append(path.xy)
    pts = np.vstack(clouds) if clouds else np.zeros((1, 2))
    lo = pts.min(axis=0) - MARGIN_M
    hi = pts.max(axis=0) + MARGIN_M
    w, h = (hi - lo) * PX_PER_M

    def tr(xy) -> np.ndarray:
        xy = np.atleast_2d(np.asarray(xy, float))
        return np.column_stack([(xy[:, 0] - lo[0]) * PX_PER_M, (hi[1] - xy[:, 1]) * PX_PER_M])

    body = []
    if title:
        body.append(f'<text x="6" y="16" font-family="monospace" font-size="12">{title}</text>')
    for b in rmap.boundaries:
        style = ('stroke="black" stroke-width="1.5"' if b.tag == BoundaryTag.ROAD
                 else 'stroke="gray" stroke-width="1" stroke-dasharray="6,4"')
        body.append(f'<polyline points="{_points(tr(b.polyline.points))}" fill="none" {style}/>')
    for o in obstacles:
        body.append(f'<polygon points="{_points(tr(o.vertices))}" fill="firebrick" fill-opacity="0.7"/>')
    if corridor is not None:
        for st in corridor.steps:
            p = st.path_pose
            t = np.array([np.cos(p.heading), np.sin(p.heading)]) * 0.5
            for hp, colour in ((st.left, "royalblue"), (st.right, "darkorange")):
                n = np.array([hp.alpha, hp.beta])
                foot = p.xy - hp.value(p.xy) * n
                seg = tr([foot - t, foot + t])
                body.append(f'<line x1="{_f(seg[0, 0])}" y1="{_f(seg[0, 1])}" x2="{_f(seg[1, 0])}" '
                            f'y2="{_f(seg[1, 1])}" stroke="{colour}" stroke-width="1"/>')
    if path is not None and len(path):
        body.append(f'<polyline points="{_points(tr(path.xy))}" fill="none" stroke="seagreen" stroke-width="2"/>')
        s, g = tr(path.xy[0])[0], tr(path.xy[-1])[0]
        body.append(f'<circle cx="{_f(s[0])}" cy="{_f(s[1])}" r="4" fill="seagreen"/>')
        body.append(f'<circle cx="{_f(g[0])}" cy="{_f(g[1])}" r="4" fill="none" stroke="seagreen" stroke-width="2"/>')
    return _doc(w, h, body)


def _panel(t: np.ndarray, series: Sequence[tuple[np.ndarray, str]], limit: float, label: str,
           y0: float, width: float, height: float) -> list[str]:
    """One time-series panel with dashed horizontal lines at +/- ``limit``."""
    pad = 40.0
    span = max(limit * 1.2, max((float(np.max(np.abs(v))) for v, _ in series if len(v)), default=0.0), 1e-9)
    t_end = float(t[-1]) if len(t) and t[-1] > 0 else 1.0

    def xy(tt, vv) -> np.ndarray:
        return np.column_stack([pad + tt / t_end * (width - 2 * pad),
                                y0 + height / 2 - np.asarray(vv) / span * (height / 2 - 10)])

    out = [f'<rect x="{_f(pad)}" y="{_f(y0)}" width="{_f(width - 2 * pad)}" height="{_f(height)}" '
           'fill="none" stroke="black" stroke-width="0.5"/>',
           f'<text x="{_f(pad + 4)}" y="{_f(y0 + 14)}" font-family="monospace" font-size="11">{label}</text>']
    for lim in (limit, -limit):
        ln = xy(np.array([0.0, t_end]), [lim, lim])
        out.append(f'<line x1="{_f(ln[0, 0])}" y1="{_f(ln[0, 1])}" x2="{_f(ln[1, 0])}" y2="{_f(ln[1, 1])}" '
                   'stroke="red" stroke-width="1" stroke-dasharray="5,3"/>')
    for v, colour in series:
        if len(v):
            out.append(f'<polyline points="{_points(xy(t, v))}" fill="none" stroke="{colour}" stroke-width="1"/>')
    return out


def command_svg(trace: np.ndarray, a_max: float, psi_max: float, width: float = 800.0) -> str:
    """Commanded acceleration and steering over time, each against its limit.

    ``trace`` has the closed-loop trace columns (t, x, y, theta, v, psi, a_cmd, dpsi_cmd, ...).
    """
    trace = np.asarray(trace, float).reshape(-1, trace.shape[1] if np.ndim(trace) == 2 else 9)
    t = trace[:, 0]
    panel_h = 180.0
    body = _panel(t, [(trace[:, 6], "navy")], a_max, f"acceleration command [m/s^2], limit {a_max:g}",
                  10.0, width, panel_h)
    body += _panel(t, [(trace[:, 5] + trace[:, 7], "navy"), (trace[:, 5], "gray")], psi_max,
                   f"steering target (navy) and angle (gray) [rad], limit {psi_max:g}",
                   20.0 + panel_h, width, panel_h)
    return _doc(width, 30.0 + 2 * panel_h, body)
