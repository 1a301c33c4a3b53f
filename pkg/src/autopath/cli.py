"""Command-line entry point: ``autopath plan|run|experiment|map``."""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import mapgen
from .config import RunConfig, load_config
from .corridor import build_corridor, classify_boundary_points
from .errors import AutopathError, NoPathFound, SchemaError, ValidationError
from .experiments import experiment_compare, experiment_scp, experiment_trials
from .planner.hybrid import plan
from .roadmap import load_map
from .sim.closed_loop import run_closed_loop
from .sim.scenario import ScenarioSpec, data_path, load_scenario
from .svg import command_svg, plan_svg

EXIT_OK, EXIT_INPUT, EXIT_NO_PATH = 0, 1, 2

EPILOG = """exit codes:
  0  success
  1  usage or input error (missing file, schema violation, invalid option)
  2  the planner found no path

Scenario and config arguments accept a file path or the name of a bundled
example (for instance --scenario scp_root or --config compare_b)."""


class InputError(Exception):
    pass


def _bundled(kind: str, ref: str) -> Path:
    p = Path(ref)
    if p.is_file():
        return p
    for cand in (data_path(kind, ref), data_path(kind, ref + ".json")):
        if cand.is_file():
            return cand
    raise InputError(f"{kind[:-1]} {ref!r} not found")


def _scenario(ref: str, map_override: str | None = None) -> ScenarioSpec:
    sc = load_scenario(_bundled("scenarios", ref))
    if map_override:
        sc = replace(sc, map=str(Path(map_override).resolve()))
    return sc


def _config(ref: str | None) -> RunConfig:
    return load_config(None if ref is None else _bundled("configs", ref))


def _progress(args):
    return (lambda msg: print(msg, file=sys.stderr)) if args.verbose else None


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


# -- commands ------------------------------------------------------------------------


def cmd_plan(args) -> int:
    sc = _scenario(args.scenario, args.map)
    cfg = _config(args.config)
    pc = cfg.planner if args.seed is None else cfg.planner.with_(rng_seed=args.seed)
    rmap = sc.load_map()
    obstacles = sc.obstacle_set()
    out = Path(args.out)
    try:
        path = plan(rmap, sc.start, sc.destination, obstacles, pc)
    except NoPathFound as exc:
        print(f"no path: {exc}", file=sys.stderr)
        _write(out / "plan.json", json.dumps({"scenario": sc.name, "success": False, "reason": str(exc),
                                              "passes": exc.passes, "samples": exc.samples}, indent=2) + "\n")
        _write(out / "plan.svg", plan_svg(rmap, sc.polygons(), title=f"{sc.name}: no path"))
        return EXIT_NO_PATH
    corridor = build_corridor(path, classify_boundary_points(path, rmap, obstacles), cfg.mpc.sigma_buffer,
                              v_ref=sc.v_ref, vehicle_width=cfg.mpc.vehicle_width)
    doc = {"scenario": sc.name, "success": True, "planner": pc.to_dict(), "path": path.to_dict(),
           "stats": path.stats, "corridor": corridor.to_dict()}
    _write(out / "plan.json", json.dumps(doc, indent=2, sort_keys=True, default=float) + "\n")
    _write(out / "plan.svg", plan_svg(rmap, sc.polygons(), path, corridor, title=f"{sc.name}: {path.cost:.3f} m"))
    print(f"path length {path.cost:.3f} m, {len(path)} poses, first solution "
          f"{path.stats['first_solution_time']:.3f} s; wrote {out}")
    return EXIT_OK


def cmd_run(args) -> int:
    sc = _scenario(args.scenario, args.map)
    if args.seed is not None:
        sc = replace(sc, rng_seed=args.seed)
    cfg = _config(args.config)
    if args.iterations:
        cfg = replace(cfg, mpc=cfg.mpc.with_(scp_iterations=_counts(args.iterations)[0]))
    res = run_closed_loop(sc, cfg.planner, cfg.mpc, cfg.simulator, cfg.loop)
    out = Path(args.out)
    _write(out / "trace.csv", res.trace_csv())
    metrics = {"scenario": sc.name, "config": cfg.to_dict(), **res.metrics.to_dict(),
               "events": [[t, e] for t, e in res.events]}
    _write(out / "metrics.json", json.dumps(metrics, indent=2, sort_keys=True, default=float) + "\n")
    _write(out / "commands.svg", command_svg(res.trace, cfg.simulator.a_max, cfg.simulator.psi_max))
    m = res.metrics
    print(f"{m.reason}: min obstacle distance {m.min_obstacle_distance:.3f} m, {len(m.violations)} limit violations, "
          f"{m.duration:.1f} s; wrote {out}")
    if m.reason == "NoPath":
        return EXIT_NO_PATH
    return EXIT_OK


def _counts(text: str) -> list[int]:
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise InputError(f"--iterations expects comma-separated integers, got {text!r}") from exc
    if not vals or min(vals) < 1:
        raise InputError("--iterations values must be positive")
    return vals


def _finish(report, args) -> int:
    written = report.write(args.out)
    for name in sorted(report.tables):
        print(f"== {name}")
        print(report.table_csv(name), end="")
    print("wrote " + ", ".join(str(p) for p in written))
    return EXIT_OK


def cmd_experiment_scp(args) -> int:
    sc = _scenario(args.scenario or "scp_root")
    report = experiment_scp(sc, _counts(args.iterations or "1,2,3,4,5"), args.count, args.seed or 0,
                            _config(args.config), args.repeats, _progress(args))
    return _finish(report, args)


def cmd_experiment_compare(args) -> int:
    if args.trials < 1:
        raise InputError("--trials must be at least 1")
    scs = args.scenario or ["compare_a", "compare_b"]
    cfgs = args.config or [None]
    if len(scs) != 2:
        raise InputError("experiment compare takes exactly two --scenario arguments")
    if len(cfgs) == 1:
        cfgs = cfgs * 2
    elif len(cfgs) != 2:
        raise InputError("experiment compare takes one or two --config arguments")
    if args.config is None:
        cfgs = [str(_bundled("configs", s)) if _has_bundled("configs", s) else None for s in scs]
    report = experiment_compare(_scenario(scs[0]), _scenario(scs[1]), args.trials, _config(cfgs[0]),
                                _config(cfgs[1]), args.seed or 0, _progress(args))
    return _finish(report, args)


def _has_bundled(kind: str, ref: str) -> bool:
    try:
        _bundled(kind, ref)
        return True
    except InputError:
        return False


def cmd_experiment_trials(args) -> int:
    if args.trials < 1:
        raise InputError("--trials must be at least 1")
    report = experiment_trials(_scenario(args.scenario or "barrel_slalom"), args.trials, args.seed or 0,
                               _config(args.config), _progress(args))
    return _finish(report, args)


def cmd_map_validate(args) -> int:
    path = Path(args.map)
    if not path.is_file():
        p = data_path("maps", args.map if args.map.endswith(".json") else args.map + ".json")
        if not p.is_file():
            raise InputError(f"map {args.map!r} not found")
        path = p
    try:
        rmap = load_map(path.read_bytes())
    except ValidationError as exc:
        print(f"{path}: invalid: {exc}")
        if exc.entity is not None:
            print(f"  entity: {exc.entity}")
        return EXIT_INPUT
    except SchemaError as exc:
        print(f"{path}: invalid: {exc}")
        return EXIT_INPUT
    print(f"{path}: ok ({len(rmap.nodes)} nodes, {len(rmap.edges)} edges, {len(rmap.boundaries)} boundaries)")
    return EXIT_OK


def cmd_map_generate(args) -> int:
    doc = mapgen.desk_map() if args.kind == "desk" else mapgen.straight_map(args.length, args.lanes)
    text = json.dumps(doc, indent=1) + "\n"
    if args.out == "-":
        sys.stdout.write(text)
    else:
        _write(Path(args.out), text)
        print(f"wrote {args.out}")
    return EXIT_OK


# -- parser ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.RawDescriptionHelpFormatter
    ap = argparse.ArgumentParser(prog="autopath", description="Hybrid lattice/sampling planner with SCP-MPC "
                                 "tracking: planning, closed-loop simulation and experiments.", epilog=EPILOG,
                                 formatter_class=fmt)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, out_default, scenario_required=True):
        p.add_argument("--scenario", required=scenario_required, help="scenario file or bundled name")
        p.add_argument("--map", help="map file overriding the scenario's map")
        p.add_argument("--config", help="config file (autopath-config/1) or bundled name")
        p.add_argument("--out", default=out_default, help="output directory (default %(default)s)")
        p.add_argument("--seed", type=int, help="planner seed override")

    p = sub.add_parser("plan", help="plan once; write plan.json and plan.svg", epilog=EPILOG, formatter_class=fmt)
    common(p, "out/plan")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("run", help="one closed-loop run; write trace.csv, metrics.json, commands.svg",
                       epilog=EPILOG, formatter_class=fmt)
    common(p, "out/run")
    p.add_argument("--iterations", help="SCP iteration count for this run")
    p.set_defaults(func=cmd_run)

    exp = sub.add_parser("experiment", help="run one of the three studies", epilog=EPILOG, formatter_class=fmt)
    esub = exp.add_subparsers(dest="experiment", required=True)
    p = esub.add_parser("scp", help="SCP iteration-count study over perturbed scenarios", epilog=EPILOG,
                        formatter_class=fmt)
    p.add_argument("--scenario", help="root scenario with a perturbation block (default scp_root)")
    p.add_argument("--config", help="config file or bundled name")
    p.add_argument("--iterations", default="1,2,3,4,5", help="comma-separated counts (default %(default)s)")
    p.add_argument("--count", type=int, default=25, help="number of perturbed scenarios (default %(default)s)")
    p.add_argument("--repeats", type=int, default=1, help="timing repeats per cell (default %(default)s)")
    p.add_argument("--seed", type=int, default=0, help="perturbation seed (default %(default)s)")
    p.add_argument("--out", default="out/experiment_scp")
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_experiment_scp)

    p = esub.add_parser("compare", help="hybrid vs lattice-only vs free-space-only planning", epilog=EPILOG,
                        formatter_class=fmt)
    p.add_argument("--scenario", action="append", help="give twice: scenario A then B (default compare_a, compare_b)")
    p.add_argument("--config", action="append", help="one config for both or two (A then B)")
    p.add_argument("--trials", type=int, default=20, help="runs per sampling mode (default %(default)s)")
    p.add_argument("--seed", type=int, default=0, help="first trial seed (default %(default)s)")
    p.add_argument("--out", default="out/experiment_compare")
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_experiment_compare)

    p = esub.add_parser("trials", help="repeated closed-loop runs against the dynamic limits", epilog=EPILOG,
                        formatter_class=fmt)
    p.add_argument("--scenario", help="scenario (default barrel_slalom)")
    p.add_argument("--config", help="config file or bundled name")
    p.add_argument("--trials", type=int, default=8, help="number of seeded trials (default %(default)s)")
    p.add_argument("--seed", type=int, default=0, help="first trial seed (default %(default)s)")
    p.add_argument("--out", default="out/experiment_trials")
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_experiment_trials)

    mp = sub.add_parser("map", help="map tooling", epilog=EPILOG, formatter_class=fmt)
    msub = mp.add_subparsers(dest="map_command", required=True)
    p = msub.add_parser("validate", help="load a map and report entity-level problems")
    p.add_argument("--map", required=True, help="map file or bundled name")
    p.set_defaults(func=cmd_map_validate)
    p = msub.add_parser("generate", help="write a generated map document")
    p.add_argument("--kind", choices=("desk", "straight"), default="desk")
    p.add_argument("--length", type=float, default=200.0, help="straight road length (default %(default)s)")
    p.add_argument("--lanes", type=int, default=2)
    p.add_argument("--out", default="-", help="output file, '-' for stdout")
    p.set_defaults(func=cmd_map_generate)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        return args.func(args)
    except NoPathFound as exc:
        print(f"no path: {exc}", file=sys.stderr)
        return EXIT_NO_PATH
    except (InputError, SchemaError, ValidationError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except AutopathError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
