"""Kinematic bicycle plant with first-order steering lag and actuator envelope."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from ..geometry import Pose2, wrap_angle
from ..mpc.model import ControlInput

SAFETY_FACTOR = 0.999  # envelope limits sit just inside the platform limits


@dataclass(frozen=True)
class PlantParams:
    """Plant constants, platform limits and loop rates."""

    l: float = 1.4
    tau_steer: float = 0.2
    a_max: float = 3.0
    jerk_max: float = 0.9
    lat_accel_max: float = 3.0
    psi_max: float = 0.52
    v_max: float = 10.0
    plant_rate: float = 100.0
    control_rate: float = 10.0

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) <= 0:
                raise ValueError(f"{f.name} must be positive")
        if self.plant_rate < self.control_rate:
            raise ValueError("plant_rate must be at least control_rate")
        ratio = self.plant_rate / self.control_rate
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("plant_rate must be an integer multiple of control_rate")

    @property
    def substeps(self) -> int:
        return int(round(self.plant_rate / self.control_rate))

    def steering_bound(self, v: float) -> float:
        """Largest |psi| keeping both the angle and lateral acceleration limits at speed ``v``."""
        lim = self.psi_max
        if v > 1e-6:
            lim = min(lim, math.atan(self.lat_accel_max * self.l / (v * v)))
        return SAFETY_FACTOR * lim

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict | None) -> "PlantParams":
        d = d or {}
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ValueError(f"unknown simulator keys: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class PlantState:
    """Rear-axle pose, speed, steering angle, time and the last applied acceleration."""

    pose: Pose2
    v: float = 0.0
    psi: float = 0.0
    t: float = 0.0
    a: float = 0.0

    def as_vector(self) -> np.ndarray:
        return np.array([self.pose.x, self.pose.y, self.pose.heading, self.v, self.psi])


def saturate(state: PlantState, control: ControlInput, dt: float, p: PlantParams) -> tuple[float, float]:
    """Applied (acceleration, steering target) after every limit is enforced."""
    a = float(np.clip(control.a, -p.a_max, p.a_max))
    step = SAFETY_FACTOR * p.jerk_max * dt
    a = float(np.clip(a, state.a - step, state.a + step))
    bound = p.steering_bound(state.v)
    target = float(np.clip(state.psi + control.dpsi, -bound, bound))
    return a, target


def _deriv(s: np.ndarray, a: float, target: float, p: PlantParams) -> np.ndarray:
    _, _, th, v, psi = s
    return np.array([v * math.cos(th), v * math.sin(th), v * math.tan(psi) / p.l, a, (target - psi) / p.tau_steer])


def plant_step(state: PlantState, control: ControlInput, dt: float, params: PlantParams | None = None) -> PlantState:
    """Advance by ``dt`` with RK4. The steering angle relaxes toward ``psi + dpsi``."""
    p = params or PlantParams()
    if not 0.0 < dt <= 0.1:
        raise ValueError("dt must lie in (0, 0.1]")
    a, target = saturate(state, control, dt, p)
    s = state.as_vector()
    k1 = _deriv(s, a, target, p)
    k2 = _deriv(s + 0.5 * dt * k1, a, target, p)
    k3 = _deriv(s + 0.5 * dt * k2, a, target, p)
    k4 = _deriv(s + dt * k3, a, target, p)
    x, y, th, v, psi = s + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    v = float(np.clip(v, 0.0, p.v_max))
    bound = p.steering_bound(v)
    psi = float(np.clip(psi, -bound, bound))
    return PlantState(Pose2(float(x), float(y), wrap_angle(float(th))), v, psi, state.t + dt, a)


def with_time(state: PlantState, t: float) -> PlantState:
    return replace(state, t=t)
