"""Command line entry point: run, compare and validate missions."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import statistics
import sys
from pathlib import Path

from hetex.config import load_config
from hetex.errors import BoundsError, ScenarioError
from hetex.scenario import parse_scenario
from hetex.sim import Simulation, write_outputs
from hetex.sphere_map import update as update_spheres

EXIT_OK = 0
EXIT_INCOMPLETE = 1
EXIT_SCHEMA = 2
EXIT_SAFETY = 3

log = logging.getLogger("hetex")


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hetex", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one mission and write its outputs")
    run.add_argument("--scenario", required=True, help="scenario JSON path or built-in name")
    run.add_argument("--allocator", choices=("greedy", "mcf"))
    run.add_argument("--seed", type=int)
    run.add_argument("--out", required=True, type=Path)
    run.add_argument("--config", help="key=value config file or built-in name")
    run.add_argument("--t-max", type=float, dest="t_max")
    run.add_argument("--dump-graph", action="store_true",
                     help="also write the final sphere graph as graph.json")

    cmp_ = sub.add_parser("compare", help="paired greedy/MCF runs over several seeds")
    cmp_.add_argument("--scenario", required=True)
    cmp_.add_argument("--seeds", type=int, default=5)
    cmp_.add_argument("--first-seed", type=int, default=1)
    cmp_.add_argument("--out", required=True, type=Path)
    cmp_.add_argument("--config")
    cmp_.add_argument("--t-max", type=float, dest="t_max")

    val = sub.add_parser("validate", help="schema check only")
    val.add_argument("--scenario", required=True)
    val.add_argument("--config")
    return ap


def _safety_fault(summary: dict) -> bool:
    return bool(summary["collision_fault"]) or not summary["safety_floor_ok"] \
        or summary["halt_violations"] > 0


def _exit_code(summary: dict) -> int:
    if _safety_fault(summary):
        return EXIT_SAFETY
    return EXIT_OK if summary["complete"] else EXIT_INCOMPLETE


def _run_one(scenario, cfg, out: Path, dump_graph: bool = False) -> dict:
    sim = Simulation(scenario, cfg)
    record = sim.run()
    write_outputs(record, out)
    if dump_graph:
        graph = update_spheres(None, sim.map.snapshot(), cfg.r_sph, cfg.stride,
                               cfg.r_max, cfg.goal_snap, cfg.start_snap)
        (out / "graph.json").write_text(json.dumps(graph.to_dict(), sort_keys=True) + "\n")
    s = record.summary
    log.info("%s seed=%s allocator=%s complete=%s t_95=%s", s["scenario"], s["seed"],
             s["allocator"], s["complete"], s["t_95"])
    return s


def cmd_run(args) -> int:
    scenario = parse_scenario(args.scenario)
    cfg = load_config(args.config, {"allocator": args.allocator, "seed": args.seed,
                                    "t_max": args.t_max})
    s = _run_one(scenario, cfg, args.out, args.dump_graph)
    print(json.dumps({k: s[k] for k in ("complete", "t_95", "final_fraction", "interventions",
                                        "min_uav_distance", "safety_floor_ok")}, sort_keys=True))
    return _exit_code(s)


def _median(values: list[float | None]) -> float | None:
    # incomplete runs rank behind every finished one
    vals = [float("inf") if v is None else v for v in values]
    m = statistics.median(vals)
    return None if m == float("inf") else m


def cmd_compare(args) -> int:
    scenario = parse_scenario(args.scenario)
    rows = []
    worst = EXIT_OK
    for seed in range(args.first_seed, args.first_seed + args.seeds):
        row = {"seed": seed}
        for alloc in ("greedy", "mcf"):
            cfg = load_config(args.config, {"allocator": alloc, "seed": seed, "t_max": args.t_max})
            s = _run_one(scenario, cfg, args.out / f"seed{seed}" / alloc)
            row[f"t95_{alloc}"] = s["t_95"]
            row[f"complete_{alloc}"] = s["complete"]
            worst = max(worst, _exit_code(s))
        rows.append(row)
    med_g = _median([r["t95_greedy"] for r in rows])
    med_m = _median([r["t95_mcf"] for r in rows])
    paired = {
        "scenario": scenario.name,
        "seeds": [r["seed"] for r in rows],
        "runs": rows,
        "median_t95_greedy": med_g,
        "median_t95_mcf": med_m,
        "mcf_not_slower": med_g is not None and med_m is not None and med_m <= med_g,
    }
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "compare.json").write_text(json.dumps(paired, sort_keys=True, indent=2) + "\n")
    with open(args.out / "compare.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["seed", "t95_greedy", "t95_mcf", "complete_greedy", "complete_mcf"])
        for r in rows:
            w.writerow([r["seed"], "" if r["t95_greedy"] is None else f"{r['t95_greedy']:.6f}",
                        "" if r["t95_mcf"] is None else f"{r['t95_mcf']:.6f}",
                        r["complete_greedy"], r["complete_mcf"]])
    print(f"median t_95 greedy={med_g} mcf={med_m}")
    return worst


def cmd_validate(args) -> int:
    scenario = parse_scenario(args.scenario)
    if args.config:
        load_config(args.config)
    world = scenario.world()
    print(f"ok: {scenario.name} dims={tuple(world.dims)} boxes={len(scenario.boxes)}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": cmd_run, "compare": cmd_compare, "validate": cmd_validate}[args.command]
    try:
        return handler(args)
    except (ScenarioError, BoundsError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA


if __name__ == "__main__":
    sys.exit(main())
