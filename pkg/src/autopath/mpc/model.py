"""State, control and parameter containers for the corridor MPC."""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np


@dataclass(frozen=True)
class VehicleState:
    x: float
    y: float
    theta: float
    v: float
    psi: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta, self.v, self.psi], dtype=float)

    @classmethod
    def from_array(cls, a) -> "VehicleState":
        return cls(*(float(v) for v in a[:5]))


@dataclass(frozen=True)
class ControlInput:
    a: float
    dpsi: float

    def as_array(self) -> np.ndarray:
        return np.array([self.a, self.dpsi], dtype=float)


@dataclass
class MpcParams:
    N: int = 30
    d: float = 1.0
    l: float = 1.4
    w1: float = 1.0
    w2: float = 5.0
    w3: float = 1.0
    w4: float = 50.0
    w5: float = 0.5
    w6: float = 1000.0
    w7: float = 1000.0
    sigma_buffer: float = 0.3
    v_max: float = 10.0
    psi_max: float = 0.52
    a_max: float = 3.0
    dpsi_max: float = 0.05
    lat_accel_max: float = 3.0
    scp_iterations: int = 4
    qp_tolerance: float = 1e-6
    trust_region: bool = True
    trust_pos: float | None = None  # positions enter the dynamics linearly; off by default
    trust_angle: float = 0.2
    v_floor: float = 0.1
    vehicle_width: float = 1.8
    paper_literal: bool = False
    fallback_brake: float = 3.0
    initial_guess: str = "path"  # path | pursuit
    warm_start: bool = False

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("N must be >= 2")
        if self.d <= 0 or self.l <= 0:
            raise ValueError("d and l must be positive")
        for name in ("w1", "w2", "w3", "w4", "w5", "w6", "w7", "sigma_buffer"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.initial_guess not in ("path", "pursuit"):
            raise ValueError("initial_guess must be 'path' or 'pursuit'")
        if self.scp_iterations < 1:
            raise ValueError("scp_iterations must be >= 1")
        if self.trust_pos is not None and self.trust_pos <= 0:
            raise ValueError("trust_pos must be positive or None")
        for name in ("v_max", "psi_max", "a_max", "dpsi_max", "qp_tolerance", "v_floor"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict | None) -> "MpcParams":
        d = dict(d or {})
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown mpc parameter keys: {sorted(unknown)}")
        return cls(**d)

    def with_(self, **kw) -> "MpcParams":
        return MpcParams(**{**self.to_dict(), **kw})
