from .closed_loop import TRACE_COLUMNS, LoopSettings, RunResult, run_closed_loop, speed_profile
from .metrics import RunMetrics, clearance_series, footprint_clearance_series
from .plant import PlantParams, PlantState, plant_step
from .scenario import (ObstacleSpec, Perturbation, ScenarioSpec, generate_perturbed_scenarios, load_scenario,
                       resolve_map)

__all__ = [
    "TRACE_COLUMNS", "LoopSettings", "RunResult", "run_closed_loop", "speed_profile", "RunMetrics",
    "clearance_series", "footprint_clearance_series", "PlantParams", "PlantState", "plant_step", "ObstacleSpec",
    "Perturbation", "ScenarioSpec", "generate_perturbed_scenarios", "load_scenario", "resolve_map",
]
