"""Run configuration files (``autopath-config/1``): planner, MPC, plant and loop settings."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import jsonschema

from .errors import SchemaError
from .mpc.model import MpcParams
from .planner.config import PlannerConfig
from .sim.closed_loop import LoopSettings
from .sim.plant import PlantParams

CONFIG_VERSION = "autopath-config/1"

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["version"],
    "additionalProperties": False,
    "properties": {
        "version": {"const": CONFIG_VERSION},
        "planner": {"type": "object"},
        "mpc": {"type": "object"},
        "simulator": {"type": "object"},
        "loop": {"type": "object"},
    },
}

# closed-loop planning stops on round counts, never on the clock, so runs are reproducible
CLOSED_LOOP_PLANNER = {"max_planning_time": 120.0, "max_rounds": 30}


@dataclass(frozen=True)
class RunConfig:
    planner: PlannerConfig = field(default_factory=lambda: PlannerConfig(**CLOSED_LOOP_PLANNER))
    mpc: MpcParams = field(default_factory=MpcParams)
    simulator: PlantParams = field(default_factory=PlantParams)
    loop: LoopSettings = field(default_factory=LoopSettings)

    def to_dict(self) -> dict:
        return {"version": CONFIG_VERSION, "planner": self.planner.to_dict(), "mpc": self.mpc.to_dict(),
                "simulator": self.simulator.to_dict(), "loop": asdict(self.loop)}

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        errors = sorted(jsonschema.Draft202012Validator(CONFIG_SCHEMA).iter_errors(d), key=lambda e: list(e.path))
        if errors:
            raise SchemaError("invalid config:\n  " + "\n  ".join(
                f"/{'/'.join(map(str, e.absolute_path))}: {e.message}" for e in errors))
        loop = d.get("loop") or {}
        unknown = set(loop) - {f.name for f in fields(LoopSettings)}
        try:
            if unknown:
                raise ValueError(f"unknown loop keys: {sorted(unknown)}")
            return cls(PlannerConfig.from_dict({**CLOSED_LOOP_PLANNER, **(d.get("planner") or {})}),
                       MpcParams.from_dict(d.get("mpc")), PlantParams.from_dict(d.get("simulator")),
                       LoopSettings(**loop))
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"invalid config: {exc}") from exc


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON: {exc}") from exc
    return RunConfig.from_dict(doc)
