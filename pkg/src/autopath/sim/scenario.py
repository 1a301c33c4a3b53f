"""Scenario documents (``autopath-scenario/1``) and the perturbation protocol."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from ..collision import ObstacleSet
from ..errors import SchemaError
from ..geometry import PolygonObstacle, Pose2
from ..roadmap import RoadMap, load_map

SCENARIO_VERSION = "autopath-scenario/1"
BARREL_SIDES = 12
MAX_RESAMPLES = 1000

_POSE = {
    "type": "object",
    "required": ["x", "y", "heading"],
    "properties": {"x": {"type": "number"}, "y": {"type": "number"}, "heading": {"type": "number"}},
}
SCENARIO_SCHEMA = {
    "type": "object",
    "required": ["version", "map", "start", "destination", "obstacles", "v_ref"],
    "additionalProperties": False,
    "properties": {
        "version": {"const": SCENARIO_VERSION},
        "name": {"type": "string"},
        "description": {"type": "string"},
        "map": {"type": "string", "minLength": 1},
        "start": _POSE,
        "start_speed": {"type": "number", "minimum": 0},
        "destination": _POSE,
        "v_ref": {"type": "number", "exclusiveMinimum": 0},
        "v_end": {"type": "number", "minimum": 0},
        "rng_seed": {"type": "integer"},
        "timeout": {"type": "number", "exclusiveMinimum": 0},
        "obstacles": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["shape", "position"],
                "additionalProperties": False,
                "properties": {
                    "id": {"type": "string"},
                    "shape": {"enum": ["box", "barrel", "polygon"]},
                    "position": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                    "length": {"type": "number", "exclusiveMinimum": 0},
                    "width": {"type": "number", "exclusiveMinimum": 0},
                    "heading": {"type": "number"},
                    "radius": {"type": "number", "exclusiveMinimum": 0},
                    "vertices": {"type": "array", "minItems": 3,
                                 "items": {"type": "array", "items": {"type": "number"}, "minItems": 2,
                                           "maxItems": 2}},
                },
                "allOf": [
                    {"if": {"properties": {"shape": {"const": "box"}}}, "then": {"required": ["length", "width"]}},
                    {"if": {"properties": {"shape": {"const": "barrel"}}}, "then": {"required": ["radius"]}},
                    {"if": {"properties": {"shape": {"const": "polygon"}}}, "then": {"required": ["vertices"]}},
                ],
            },
        },
        "perturbation": {
            "type": "object",
            "required": ["sigma"],
            "additionalProperties": False,
            "properties": {"sigma": {"type": "number", "minimum": 0}, "keep_on_road": {"type": "boolean"},
                           "clear_radius": {"type": "number", "minimum": 0}},
        },
    },
}


@dataclass(frozen=True)
class ObstacleSpec:
    """Obstacle shape in local coordinates placed at ``position``."""

    shape: str
    position: tuple[float, float]
    id: str = ""
    length: float = 0.0
    width: float = 0.0
    heading: float = 0.0
    radius: float = 0.0
    vertices: tuple[tuple[float, float], ...] = ()

    def polygon(self) -> PolygonObstacle:
        if self.shape == "box":
            return PolygonObstacle.box(self.position, self.length, self.width, self.heading, id=self.id)
        if self.shape == "barrel":
            return PolygonObstacle.regular(self.position, self.radius, BARREL_SIDES, id=self.id)
        v = np.asarray(self.vertices, float) + np.asarray(self.position, float)
        return PolygonObstacle(v, id=self.id)

    def moved(self, dx: float, dy: float) -> "ObstacleSpec":
        return replace(self, position=(self.position[0] + dx, self.position[1] + dy))

    def to_dict(self) -> dict:
        d = {"id": self.id, "shape": self.shape, "position": list(self.position)}
        if self.shape == "box":
            d.update(length=self.length, width=self.width, heading=self.heading)
        elif self.shape == "barrel":
            d["radius"] = self.radius
        else:
            d["vertices"] = [list(v) for v in self.vertices]
        return d

    @classmethod
    def from_dict(cls, d: dict, index: int = 0) -> "ObstacleSpec":
        return cls(d["shape"], (float(d["position"][0]), float(d["position"][1])), d.get("id", f"obs{index}"),
                   float(d.get("length", 0.0)), float(d.get("width", 0.0)), float(d.get("heading", 0.0)),
                   float(d.get("radius", 0.0)), tuple(tuple(map(float, v)) for v in d.get("vertices", ())))


@dataclass(frozen=True)
class Perturbation:
    sigma: float = 1.0
    keep_on_road: bool = True
    clear_radius: float = 8.0  # perturbed obstacles keep this distance from start and destination


@dataclass(frozen=True)
class ScenarioSpec:
    map: str
    start: Pose2
    destination: Pose2
    obstacles: tuple[ObstacleSpec, ...] = ()
    v_ref: float = 6.0
    rng_seed: int = 0
    perturbation: Perturbation | None = None
    name: str = ""
    start_speed: float = 0.0
    v_end: float = 0.5
    timeout: float | None = None
    base_dir: str = field(default="", compare=False)

    def polygons(self) -> list[PolygonObstacle]:
        return [o.polygon() for o in self.obstacles]

    def obstacle_set(self) -> ObstacleSet:
        return ObstacleSet(self.polygons())

    def load_map(self) -> RoadMap:
        return resolve_map(self.map, self.base_dir)

    def to_dict(self) -> dict:
        d = {
            "version": SCENARIO_VERSION,
            "name": self.name,
            "map": self.map,
            "start": self.start.to_dict(),
            "start_speed": self.start_speed,
            "destination": self.destination.to_dict(),
            "v_ref": self.v_ref,
            "v_end": self.v_end,
            "rng_seed": self.rng_seed,
            "obstacles": [o.to_dict() for o in self.obstacles],
        }
        if self.timeout is not None:
            d["timeout"] = self.timeout
        if self.perturbation is not None:
            pt = self.perturbation
            d["perturbation"] = {"sigma": pt.sigma, "keep_on_road": pt.keep_on_road, "clear_radius": pt.clear_radius}
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict, base_dir: str = "") -> "ScenarioSpec":
        validator = jsonschema.Draft202012Validator(SCENARIO_SCHEMA)
        errors = sorted(validator.iter_errors(d), key=lambda e: list(e.absolute_path))
        if errors:
            msgs = [f"/{'/'.join(map(str, e.absolute_path))}: {e.message}" for e in errors]
            raise SchemaError("invalid scenario:\n  " + "\n  ".join(msgs))
        pt = d.get("perturbation")
        return cls(
            map=d["map"],
            start=Pose2.from_dict(d["start"]),
            destination=Pose2.from_dict(d["destination"]),
            obstacles=tuple(ObstacleSpec.from_dict(o, i) for i, o in enumerate(d["obstacles"])),
            v_ref=float(d["v_ref"]),
            rng_seed=int(d.get("rng_seed", 0)),
            perturbation=None if pt is None else Perturbation(float(pt["sigma"]), bool(pt.get("keep_on_road", True)),
                                                            float(pt.get("clear_radius", 8.0))),
            name=d.get("name", ""),
            start_speed=float(d.get("start_speed", 0.0)),
            v_end=float(d.get("v_end", 0.5)),
            timeout=d.get("timeout"),
            base_dir=base_dir,
        )


def data_path(*parts: str) -> Path:
    return Path(str(resources.files("autopath").joinpath("data", *parts)))


def resolve_map(ref: str, base_dir: str = "") -> RoadMap:
    """A map reference is a file path (relative to the scenario file) or a bundled map name."""
    candidates = [Path(base_dir) / ref, Path(ref), data_path("maps", ref), data_path("maps", ref + ".json")]
    for c in candidates:
        if c.is_file():
            return load_map(c.read_bytes())
    raise FileNotFoundError(f"map {ref!r} not found")


def load_scenario(path: str | Path) -> ScenarioSpec:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON: {exc}") from exc
    return ScenarioSpec.from_dict(doc, str(path.parent))


def _on_road(poly: PolygonObstacle, rmap: RoadMap) -> bool:
    pts = np.vstack([poly.vertices, poly.centroid[None, :]])
    return all(rmap.is_driveable(p) for p in pts)


def generate_perturbed_scenarios(root: ScenarioSpec, count: int, seed: int,
                                 rmap: RoadMap | None = None) -> list[ScenarioSpec]:
    """``count`` copies of ``root`` with every obstacle shifted by an independent 2-D Gaussian.

    A displacement is redrawn until the obstacle lies on the road (when
    ``keep_on_road``) and stays ``clear_radius`` away from start and destination.
    Scenario ``i`` uses its own generator seeded from ``(seed, i)``.
    """
    if root.perturbation is None:
        raise ValueError("root scenario has no perturbation config")
    if count < 0:
        raise ValueError("count must be non-negative")
    pt = root.perturbation
    rmap = rmap if rmap is not None else (root.load_map() if pt.keep_on_road and pt.sigma > 0 else None)
    ends = np.array([root.start.xy, root.destination.xy])
    out = []
    for i in range(count):
        rng = np.random.default_rng([seed, i])
        moved = []
        for o in root.obstacles:
            if pt.sigma == 0:
                moved.append(o)
                continue
            for _ in range(MAX_RESAMPLES):
                dx, dy = rng.normal(0.0, pt.sigma, 2)
                cand = o.moved(float(dx), float(dy))
                poly = cand.polygon()
                far = np.min(np.hypot(*(ends - poly.centroid).T)) >= pt.clear_radius
                if far and (not pt.keep_on_road or _on_road(poly, rmap)):
                    break
            else:
                raise RuntimeError(f"could not place obstacle {o.id!r} after {MAX_RESAMPLES} draws")
            moved.append(cand)
        out.append(replace(root, obstacles=tuple(moved), rng_seed=int(rng.integers(2 ** 31)),
                           name=f"{root.name or 'scenario'}-{i:03d}"))
    return out
