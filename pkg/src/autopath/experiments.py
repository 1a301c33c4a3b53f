"""The three studies: SCP iteration count, planner comparison and constraint trials."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from .config import RunConfig
from .errors import NoPathFound
from .planner.hybrid import plan
from .sim.closed_loop import run_closed_loop
from .sim.scenario import ScenarioSpec, generate_perturbed_scenarios

PLANNER_MODES = ("hybrid", "lattice", "freespace")
TIMING_KEYS = ("solution_time", "total_time", "mean_scp_time", "total_scp_time", "scp_time_mean", "scp_time_std")


@dataclass
class ExperimentReport:
    """Per-trial rows, aggregate statistics, named tables and everything needed to rerun."""

    experiment: str
    rows: list[dict]
    aggregates: dict
    config: dict
    seeds: dict
    tables: dict[str, list[list]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"experiment": self.experiment, "config": self.config, "seeds": self.seeds,
                "aggregates": self.aggregates, "rows": self.rows, "tables": self.tables}

    def dumps(self) -> str:
        return json.dumps(_jsonable(self.to_dict()), indent=2, sort_keys=True)

    def table_csv(self, name: str) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        for row in self.tables[name]:
            w.writerow([_cell(x) for x in row])
        return buf.getvalue()

    def write(self, out_dir: str | Path) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = [out / "report.json"]
        written[0].write_text(self.dumps() + "\n")
        for name in sorted(self.tables):
            p = out / f"{name}.csv"
            p.write_text(self.table_csv(name))
            written.append(p)
        return written


def _cell(x):
    if isinstance(x, float):
        return "" if math.isnan(x) else repr(x)
    return x


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return None if not math.isfinite(x) else x
    if isinstance(x, np.integer):
        return int(x)
    return x


def descending_ranks(values) -> np.ndarray:
    """Rank 1 = largest value; ties share the best rank."""
    return rankdata(-np.asarray(values, float), method="min").astype(int)


# -- SCP iteration study -------------------------------------------------------------


def experiment_scp(root: ScenarioSpec, counts=(1, 2, 3, 4, 5), n_scenarios: int = 25, seed: int = 0,
                   config: RunConfig | None = None, repeats: int = 1, progress=None) -> ExperimentReport:
    """Closed-loop runs of every perturbed scenario at every SCP iteration count.

    The initial plan is computed once per scenario and shared by all counts, so
    the counts differ only in the controller. ``repeats`` reruns each cell to
    average solve times (the trajectories are deterministic).
    """
    cfg = config or RunConfig()
    counts = [int(k) for k in counts]
    if not counts or min(counts) < 1 or len(set(counts)) != len(counts):
        raise ValueError("iteration counts must be distinct positive integers")
    if n_scenarios < 1 or repeats < 1:
        raise ValueError("scenario count and repeats must be positive")
    rmap = root.load_map()
    scenarios = generate_perturbed_scenarios(root, n_scenarios, seed, rmap)
    rows = []
    times: dict[int, list[float]] = {k: [] for k in counts}
    for i, sc in enumerate(scenarios):
        pc = cfg.planner.with_(rng_seed=sc.rng_seed)
        try:
            path = plan(rmap, sc.start, sc.destination, sc.obstacle_set(), pc)
        except NoPathFound:
            path = None
        for k in counts:
            mp = cfg.mpc.with_(scp_iterations=k)
            for rep in range(repeats):
                if path is None:
                    res = run_closed_loop(sc, pc, mp, cfg.simulator, cfg.loop, rmap=rmap)
                else:
                    res = run_closed_loop(sc, pc, mp, cfg.simulator, cfg.loop, rmap=rmap, initial_path=path)
                times[k].extend(res.scp_times)
                if rep == 0:
                    m = res.metrics
                    rows.append({"scenario": i, "name": sc.name, "iterations": k, "success": m.success,
                                 "reason": m.reason, "min_obstacle_distance": m.min_obstacle_distance,
                                 "min_footprint_clearance": m.min_footprint_clearance,
                                 "mean_scp_time": m.mean_scp_time, "total_scp_time": float(sum(res.scp_times)),
                                 "ticks": m.ticks, "fallbacks": m.fallbacks, "replans": m.replans})
            if progress:
                progress(f"scenario {i} k={k}: {rows[-1]['reason']} d={rows[-1]['min_obstacle_distance']:.3f}")
    rank_table = [["scenario"] + [f"k{k}" for k in counts]]
    ranks = np.zeros((n_scenarios, len(counts)), int)
    for i in range(n_scenarios):
        d = [next(r["min_obstacle_distance"] for r in rows if r["scenario"] == i and r["iterations"] == k)
             for k in counts]
        ranks[i] = descending_ranks(d)
        rank_table.append([i] + ranks[i].tolist())
    for r in rows:
        r["rank"] = int(ranks[r["scenario"], counts.index(r["iterations"])])
    timing_table = [["iterations", "scp_time_mean", "scp_time_std", "ticks"]]
    dist_table = [["iterations", "mean_min_distance", "std_min_distance", "top2_fraction", "success_rate"]]
    agg = {"counts": counts, "per_count": {}}
    for j, k in enumerate(counts):
        d = np.array([r["min_obstacle_distance"] for r in rows if r["iterations"] == k])
        ok = np.array([r["success"] for r in rows if r["iterations"] == k])
        t = np.array(times[k]) if times[k] else np.zeros(1)
        top2 = float(np.mean(ranks[:, j] <= 2))
        agg["per_count"][str(k)] = {"mean_min_distance": float(d.mean()), "std_min_distance": float(d.std()),
                                    "top2_fraction": top2, "success_rate": float(ok.mean()),
                                    "scp_time_mean": float(t.mean()), "scp_time_std": float(t.std())}
        timing_table.append([k, float(t.mean()), float(t.std()), len(times[k])])
        dist_table.append([k, float(d.mean()), float(d.std()), top2, float(ok.mean())])
    return ExperimentReport(
        "scp", rows, agg, {"run": cfg.to_dict(), "root": root.to_dict(), "counts": counts, "repeats": repeats},
        {"seed": seed, "scenario_seeds": [s.rng_seed for s in scenarios]},
        {"rank_matrix": rank_table, "scp_timing": timing_table, "min_distance": dist_table},
    )


# -- planner comparison ---------------------------------------------------------------


def _plan_row(sc: ScenarioSpec, cfg: RunConfig, mode: str, trial: int, seed: int, rmap) -> dict:
    pc = cfg.planner.with_(mode=mode, rng_seed=seed)
    try:
        p = plan(rmap, sc.start, sc.destination, sc.obstacle_set(), pc)
    except NoPathFound as exc:
        return {"scenario": sc.name, "mode": mode, "trial": trial, "seed": seed, "success": False,
                "solution_time": math.nan, "total_time": math.nan, "length": math.nan,
                "first_pass_length": math.nan, "passes": exc.passes, "note": str(exc)}
    st = p.stats
    first = st.get("first_pass_cost", math.inf)
    return {"scenario": sc.name, "mode": mode, "trial": trial, "seed": seed, "success": True,
            "solution_time": st["first_solution_time"], "total_time": st["total_time"], "length": p.cost,
            "first_pass_length": first if math.isfinite(first) else math.nan, "passes": st["passes"], "note": ""}


def experiment_compare(scenario_a: ScenarioSpec, scenario_b: ScenarioSpec, trials: int = 20,
                       config_a: RunConfig | None = None, config_b: RunConfig | None = None,
                       seed: int = 0, progress=None) -> ExperimentReport:
    """Hybrid, lattice-only and free-space-only planning on two scenarios.

    The lattice mode is deterministic and runs once; the sampling modes run
    ``trials`` times with seeds ``seed .. seed + trials - 1``.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    rows = []
    cfgs = {}
    for sc, cfg in ((scenario_a, config_a), (scenario_b, config_b)):
        cfg = cfg or RunConfig()
        cfgs[sc.name] = cfg.to_dict()
        rmap = sc.load_map()
        for mode in PLANNER_MODES:
            n = 1 if mode == "lattice" else trials
            for t in range(n):
                rows.append(_plan_row(sc, cfg, mode, t, seed + t, rmap))
                if progress:
                    r = rows[-1]
                    progress(f"{sc.name} {mode} #{t}: {'ok' if r['success'] else 'no path'} {r['solution_time']:.3f}s")
    budget = {name: c["planner"]["max_planning_time"] for name, c in cfgs.items()}
    table = [["scenario", "mode", "runs", "success_rate", "median_solution_time", "length", "first_pass_length"]]
    agg = {}
    for sc in (scenario_a, scenario_b):
        for mode in PLANNER_MODES:
            rs = [r for r in rows if r["scenario"] == sc.name and r["mode"] == mode]
            ok = [r for r in rs if r["success"]]
            # failures count at the full budget, so the median is a censored lower bound
            tt = [r["solution_time"] if r["success"] else budget[sc.name] for r in rs]
            entry = {"runs": len(rs), "successes": len(ok), "success_rate": len(ok) / len(rs),
                     "median_solution_time": float(np.median(tt)),
                     "median_length": float(np.median([r["length"] for r in ok])) if ok else math.nan,
                     "first_pass_length": ok[0]["first_pass_length"] if ok else math.nan}
            agg[f"{sc.name}/{mode}"] = entry
            table.append([sc.name, mode, len(rs), entry["success_rate"],
                          entry["median_solution_time"],
                          entry["median_length"] if ok else "N/A", entry["first_pass_length"] if ok else "N/A"])
    return ExperimentReport(
        "compare", rows, agg,
        {"configs": cfgs, "scenarios": [scenario_a.to_dict(), scenario_b.to_dict()], "trials": trials},
        {"seed": seed, "trial_seeds": list(range(seed, seed + trials))}, {"planner_comparison": table},
    )


# -- constraint trials -----------------------------------------------------------------


METRIC_LIMITS = (("max_long_accel", "a_max"), ("max_long_jerk", "jerk_max"), ("max_lat_accel", "lat_accel_max"),
                 ("max_steering_angle", "psi_max"), ("max_steering_rate", None))


def experiment_trials(scenario: ScenarioSpec, trials: int = 8, seed: int = 0, config: RunConfig | None = None,
                      progress=None) -> ExperimentReport:
    """Repeated closed-loop runs with distinct planner seeds; maxima across trials vs limits."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    cfg = config or RunConfig()
    rmap = scenario.load_map()
    rows = []
    for t in range(trials):
        sc = replace(scenario, rng_seed=seed + t)
        res = run_closed_loop(sc, cfg.planner, cfg.mpc, cfg.simulator, cfg.loop, rmap=rmap)
        m = res.metrics
        rows.append({"trial": t, "seed": seed + t, **{k: v for k, v in m.to_dict().items() if k != "timing"}})
        if progress:
            progress(f"trial {t}: {m.reason} violations={m.violations}")
    limits = cfg.simulator.to_dict()
    table = [["metric", "max_across_trials", "limit", "within_limit"]]
    agg = {"success_rate": float(np.mean([r["success"] for r in rows])), "maxima": {}}
    for key, lim_key in METRIC_LIMITS:
        mx = float(max(r[key] for r in rows))
        lim = limits[lim_key] if lim_key else None
        agg["maxima"][key] = {"max": mx, "limit": lim}
        table.append([key, mx, "N/A" if lim is None else lim, "N/A" if lim is None else mx <= lim])
    table.append(["success_rate", agg["success_rate"], "", ""])
    return ExperimentReport("trials", rows, agg, {"run": cfg.to_dict(), "scenario": scenario.to_dict(),
                                                  "trials": trials},
                            {"seed": seed, "trial_seeds": list(range(seed, seed + trials))},
                            {"constraint_maxima": table})
