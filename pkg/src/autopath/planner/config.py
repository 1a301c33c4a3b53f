from __future__ import annotations

from dataclasses import asdict, dataclass, fields

MODES = ("hybrid", "lattice", "freespace")


@dataclass
class PlannerConfig:
    """Numeric knobs of the hybrid lattice / free-space planner."""

    max_planning_time: float = 10.0
    samples_per_round: int = 50
    sigma_long: float = 2.0
    sigma_lat: float = 1.5
    sigma_yaw: float = 0.15
    uniform_samples_per_round: int = 20
    connect_radius: float = 8.0
    max_heading_change: float = 0.6
    rng_seed: int = 0
    mode: str = "hybrid"
    collision_margin: float = 0.2
    min_connect_distance: float = 0.5
    uniform_region_margin: float = 10.0
    max_rounds: int = 100
    improvement_patience: int = 2
    improvement_tolerance: float = 0.1
    path_spacing: float = 1.0
    curb_thickness: float = 0.3

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        positive = ("max_planning_time", "sigma_long", "sigma_lat", "sigma_yaw", "connect_radius",
                    "max_heading_change", "path_spacing")
        for name in positive:
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("samples_per_round", "uniform_samples_per_round", "collision_margin", "max_rounds",
                     "improvement_tolerance"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict | None) -> "PlannerConfig":
        d = d or {}
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown planner config keys: {sorted(unknown)}")
        return cls(**d)

    def with_(self, **kw) -> "PlannerConfig":
        return PlannerConfig(**{**self.to_dict(), **kw})
