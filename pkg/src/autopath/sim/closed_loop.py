"""Plan, corridor, MPC and plant wired into one deterministic closed loop."""
from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..collision import ObstacleSet, VehicleFootprint, poses_collision
from ..corridor import build_corridor, classify_boundary_points
from ..errors import AutopathError, NoPathFound
from ..geometry import Pose2
from ..mpc.model import ControlInput, MpcParams, VehicleState
from ..mpc.scp import MpcController
from ..planner.config import PlannerConfig
from ..planner.hybrid import plan
from ..planner.path import PlannedPath
from ..roadmap import RoadMap
from .metrics import RunMetrics, clearance_series, footprint_clearance_series, dynamics_maxima, limit_violations, path_length
from .plant import PlantParams, PlantState, plant_step, saturate
from .scenario import ScenarioSpec

TRACE_COLUMNS = ("t", "x", "y", "theta", "v", "psi", "a_cmd", "dpsi_cmd", "min_obst_dist")


@dataclass(frozen=True)
class LoopSettings:
    replan_deviation: float = 1.5
    goal_tolerance: float = 1.0
    comfort_decel: float = 1.0  # shapes the speed reference into the destination
    min_replan_interval: float = 1.0
    timeout_slack: float = 30.0


@dataclass
class Trace:
    """Plant-rate samples; ``a_cmd`` and ``dpsi_cmd`` are the saturated commands applied to the plant."""

    rows: list[tuple] = field(default_factory=list)

    def append(self, s: PlantState, a_cmd: float, dpsi_cmd: float) -> None:
        self.rows.append((s.t, s.pose.x, s.pose.y, s.pose.heading, s.v, s.psi, a_cmd, dpsi_cmd))

    def array(self) -> np.ndarray:
        return np.array(self.rows, dtype=float).reshape(-1, 8)


@dataclass
class RunResult:
    metrics: RunMetrics
    trace: np.ndarray  # columns as TRACE_COLUMNS
    paths: list[PlannedPath] = field(default_factory=list)
    scp_times: list[float] = field(default_factory=list)
    events: list[tuple[float, str]] = field(default_factory=list)

    def trace_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for row in self.trace:
            w.writerow([repr(float(x)) for x in row])
        return buf.getvalue()


def speed_profile(remaining: np.ndarray, v_cruise: float, v_end: float, decel: float) -> np.ndarray:
    """Cruise speed capped so the vehicle can slow to ``v_end`` at the destination."""
    return np.minimum(v_cruise, np.sqrt(v_end ** 2 + 2.0 * decel * np.maximum(remaining, 0.0)))


def run_closed_loop(
    scenario: ScenarioSpec,
    planner_config: PlannerConfig | None = None,
    mpc_params: MpcParams | None = None,
    plant_params: PlantParams | None = None,
    settings: LoopSettings | None = None,
    rmap: RoadMap | None = None,
    footprint: VehicleFootprint | None = None,
    initial_path: PlannedPath | None = None,
) -> RunResult:
    """Drive ``scenario`` to completion. Failures are recorded in the metrics, never raised.

    ``initial_path`` skips the first planner call (it must come from the same
    scenario and planner config for the run to be meaningful).
    """
    pc = (planner_config or PlannerConfig()).with_(rng_seed=scenario.rng_seed)
    mp = mpc_params or MpcParams()
    pp = plant_params or PlantParams()
    ls = settings or LoopSettings()
    fp = footprint or VehicleFootprint()
    rmap = rmap if rmap is not None else scenario.load_map()
    obstacles = scenario.obstacle_set()
    hazards = obstacles.union(rmap.curbs(pc.curb_thickness))
    dest = scenario.destination
    dt = 1.0 / pp.plant_rate
    nsub = pp.substeps
    timing = {"planning": 0.0, "corridor": 0.0, "mpc": 0.0, "plant": 0.0}

    state = PlantState(scenario.start, min(scenario.start_speed, pp.v_max), 0.0, 0.0, 0.0)
    trace = Trace()
    trace.append(state, 0.0, 0.0)
    paths: list[PlannedPath] = []
    scp_times: list[float] = []
    events: list[tuple[float, str]] = []
    controller = MpcController(mp)
    replans = fallbacks = ticks = 0
    reason = "timeout"

    def do_plan(pose: Pose2) -> PlannedPath | None:
        t0 = time.perf_counter()
        try:
            return plan(rmap, pose, dest, obstacles, pc, fp)
        except NoPathFound:
            return None
        finally:
            timing["planning"] += time.perf_counter() - t0

    path = initial_path if initial_path is not None else do_plan(state.pose)
    if path is None:
        reason = "NoPath"
    else:
        paths.append(path)
        horizon_t = scenario.timeout or (path.length / scenario.v_ref * 2.0 + ls.timeout_slack)
        last_plan_t = 0.0
        step = 0
        done = False
        while not done:
            if state.t >= horizon_t - 1e-9:
                reason = "timeout"
                break
            s0, lat, _ = path.project((state.pose.x, state.pose.y))
            remaining_path = path.length - s0
            if _passed(state.pose, dest):
                reason = "missed_goal"
                break
            exhausted = remaining_path < mp.d and state.pose.distance_to(dest) > ls.goal_tolerance + mp.d
            if (abs(lat) > ls.replan_deviation or exhausted) and state.t - last_plan_t >= ls.min_replan_interval:
                new = do_plan(state.pose)
                last_plan_t = state.t
                if new is None:
                    events.append((state.t, "replan failed"))
                else:
                    path = new
                    paths.append(path)
                    replans += 1
                    events.append((state.t, "replan"))
                    controller.reset()
                    s0, lat, _ = path.project((state.pose.x, state.pose.y))

            ticks += 1
            t0 = time.perf_counter()
            window = path.window(s0, mp.N, mp.d)
            vr = speed_profile(path.length - np.array([p.s for p in window]), scenario.v_ref, scenario.v_end,
                               ls.comfort_decel)
            corridor = None
            if len(window) >= 2:
                try:
                    cl = classify_boundary_points(window, rmap, obstacles, along=path)
                    at_end = window[-1].s > path.length - mp.d and len(window) <= mp.N
                    corridor = build_corridor(window, cl, mp.sigma_buffer, mp.N, vr, mp.vehicle_width,
                                              terminal_reference=at_end)
                except AutopathError:
                    corridor = None
            timing["corridor"] += time.perf_counter() - t0

            t0 = time.perf_counter()
            if corridor is None and len(window) < 2:
                # end of the path: roll on at the current speed until the destination is reached
                ctrl = ControlInput(0.0, 0.0)
            elif corridor is None:
                fallbacks += 1
                events.append((state.t, "fallback: no corridor"))
                controller.reset()
                ctrl = ControlInput(-mp.fallback_brake, 0.0)
            else:
                vs = VehicleState(state.pose.x, state.pose.y, state.pose.heading, state.v, state.psi)
                ctrl, sol = controller.tick(vs, corridor, vr)
                if sol.status.startswith("fallback"):
                    fallbacks += 1
                    events.append((state.t, sol.status))
                else:
                    scp_times.append(sol.total_solve_time)
            timing["mpc"] += time.perf_counter() - t0

            # steering target fixed for the control period; plant rate-limits everything else
            t0 = time.perf_counter()
            psi_target = state.psi + ctrl.dpsi
            for _ in range(nsub):
                step += 1
                cmd = ControlInput(ctrl.a, psi_target - state.psi)
                prev = state
                state = plant_step(state, cmd, dt, pp)
                state = PlantState(state.pose, state.v, state.psi, step * dt, state.a)
                trace.append(state, state.a, _applied_dpsi(prev, cmd, dt, pp))
                hit, _ = poses_collision(np.array([[state.pose.x, state.pose.y]]), np.array([state.pose.heading]),
                                         fp, hazards, 0.0)
                if hit[0]:
                    reason, done = "collision", True
                    break
                if state.pose.distance_to(dest) <= ls.goal_tolerance:
                    reason, done = "goal", True
                    break
            timing["plant"] += time.perf_counter() - t0

    arr = trace.array()
    clear = clearance_series(arr[:, 1:3], obstacles)
    body = footprint_clearance_series(arr[:, 1:3], arr[:, 3], obstacles, fp)
    full = np.column_stack([arr, clear])
    maxima = dynamics_maxima(arr[:, 0], arr[:, 4], arr[:, 5], arr[:, 6], pp)
    violations = limit_violations(maxima, pp)
    collisions = int(reason == "collision")
    success = reason == "goal" and not violations
    metrics = RunMetrics(
        success=success,
        reason=reason,
        min_obstacle_distance=float(clear.min()) if len(obstacles) else math.inf,
        min_footprint_clearance=float(body.min()) if len(obstacles) else math.inf,
        path_length=path_length(arr[:, 1:3]),
        duration=float(arr[-1, 0]),
        collisions=collisions,
        violations=violations,
        replans=replans,
        fallbacks=fallbacks,
        ticks=ticks,
        mean_scp_time=float(np.mean(scp_times)) if scp_times else 0.0,
        timing=timing,
        **maxima,
    )
    return RunResult(metrics, full, paths, scp_times, events)


def _applied_dpsi(prev: PlantState, cmd: ControlInput, dt: float, p: PlantParams) -> float:
    _, target = saturate(prev, cmd, dt, p)
    return target - prev.psi


def _passed(pose: Pose2, dest: Pose2) -> bool:
    """True once the vehicle is beyond the destination along the destination heading."""
    return (pose.x - dest.x) * np.cos(dest.heading) + (pose.y - dest.y) * np.sin(dest.heading) > 0.0
