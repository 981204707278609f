"""Command line: ``hpcdtm run|battery|calibrate|export``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import yaml

from .calibration import calibrate
from .config import ConfigError, load_config
from .harness import (BatterySpec, ExportError, ScenarioError, build_scenario, export_battery,
                      read_results_csv, run_battery, run_test, write_controller_csv,
                      write_long_csv, write_run_csv, write_summary_json)
from .harness.metrics import aggregate

QUICK_RUN_DURATION = 0.2  # s


def _csv(value: str | None):
    return None if value is None else tuple(v.strip().upper() for v in value.split(",") if v.strip())


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="YAML file merged over the defaults")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--algorithm", help="VBA, EBA or FCA (comma list for battery)")
    p.add_argument("--cores", type=int, help="square core count, e.g. 9 or 36")
    p.add_argument("--domains", help="1D, 4D, 9D or AD (comma list for battery)")
    p.add_argument("--cooling", help="WATER, AIR or RACK (comma list for battery)")
    p.add_argument("--workload", help="MAX-WL, MULTI-WL or CLOUD-WL (comma list for battery)")
    p.add_argument("--duration", type=float, help="s")
    p.add_argument("--out", type=Path, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hpcdtm", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one test case")
    _common(p)
    p.add_argument("--quick", action="store_true", help=f"shorten to {QUICK_RUN_DURATION} s")

    p = sub.add_parser("battery", help="run a test battery")
    _common(p)
    p.add_argument("--quick", action="store_true", help="9-core battery (default is the full one)")
    p.add_argument("--seeds", type=int, help="number of seeds, counted up from --seed")
    p.add_argument("--workers", type=int, help="worker processes")

    p = sub.add_parser("calibrate", help="fit the power model to its anchors")
    p.add_argument("--config", type=Path)
    p.add_argument("--out", type=Path, help="write calibration.yaml here")

    p = sub.add_parser("export", help="rebuild long CSV and JSON summary from results.csv")
    p.add_argument("results", type=Path, help="results.csv written by `battery`")
    p.add_argument("--config", type=Path)
    p.add_argument("--out", type=Path, help="defaults to the directory of RESULTS")
    return ap


def cmd_run(args, cfg) -> int:
    spec = cfg.scenario_spec(n_c=args.cores, seed=args.seed, algorithm=args.algorithm,
                             domains=args.domains, cooling=args.cooling, workload=args.workload,
                             duration=QUICK_RUN_DURATION if args.quick else args.duration)
    case = build_scenario(spec, cfg.plant.grid, cfg.plant.power)
    rec, m = run_test(case, cfg.plant)
    for k, v in m.as_dict().items():
        print(f"{k:28s} {v:.6g}" if isinstance(v, float) else f"{k:28s} {v}")
    print(f"{'wall_time_s':28s} {rec.manifest['wall_time_s']:.3f}")
    if args.out:
        write_run_csv(rec, args.out / "run.csv")
        write_controller_csv(rec, args.out / "controller.csv")
        (args.out / "metrics.json").write_text(
            json.dumps({"manifest": rec.manifest, "metrics": m.as_dict()}, indent=1))
        print(f"wrote {args.out}")
    return 0


def cmd_battery(args, cfg) -> int:
    b = cfg.battery
    n_c = 9 if args.quick else (args.cores or int(b.get("full_cores", 36)))
    base = cfg.scenario_spec(duration=args.duration, n_c=n_c)
    start = args.seed or 0
    n_seeds = args.seeds or int(b.get("seeds", 10))
    axes = {"workloads": _csv(args.workload) or tuple(b["workloads"]),
            "coolings": _csv(args.cooling) or tuple(b["coolings"]),
            "domains": _csv(args.domains) or tuple(b["domains"]),
            "algorithms": _csv(args.algorithm) or tuple(b["algorithms"])}
    battery = BatterySpec(seeds=tuple(range(start, start + n_seeds)), base=replace(base), **axes)
    workers = args.workers or int(b.get("workers", 1))

    def progress(done, total, row):
        if done % 25 == 0 or done == total:
            print(f"  {done}/{total} runs", file=sys.stderr)

    print(f"battery: {len(battery)} runs, {n_c} cores, {workers} worker(s)", file=sys.stderr)
    res = run_battery(battery, cfg.plant, workers=workers, progress=progress)
    summary = aggregate(res.rows, ("algorithm",))
    _print_table(summary)
    print(f"wall time {res.wall_time_s:.1f} s")
    if args.out:
        export_battery(res, args.out, manifest={"config": cfg.tree, "n_c": n_c})
        print(f"wrote {args.out}")
    return 0


def _print_table(summary: dict):
    cols = ("thermal_exceeded_max", "thermal_exceeded_time", "power_exceeded_avg",
            "power_exceeded_time", "target_l2", "av_wlp", "min_wlp", "avg_temp")
    print("alg  " + " ".join(f"{c[:14]:>14s}" for c in cols))
    for key, stats in summary.items():
        print(f"{key[0]:4s} " + " ".join(f"{stats[c]['mean']:14.4g}" for c in cols))


def cmd_calibrate(args, cfg) -> int:
    res = calibrate()
    print(res.report())
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        tree = {"plant": {"power": {k: float(v) for k, v in res.params.as_dict().items()}}}
        (args.out / "calibration.yaml").write_text(yaml.safe_dump(tree, sort_keys=False))
        print(f"wrote {args.out / 'calibration.yaml'}")
    return 0


def cmd_export(args, cfg) -> int:
    rows = read_results_csv(args.results)
    out = args.out or args.results.parent
    write_long_csv(rows, out / "long.csv")
    write_summary_json(rows, out / "summary.json", manifest={"source": str(args.results)})
    print(f"wrote {out / 'long.csv'} and {out / 'summary.json'} ({len(rows)} runs)")
    return 0


COMMANDS = {"run": cmd_run, "battery": cmd_battery, "calibrate": cmd_calibrate, "export": cmd_export}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](args, cfg)
    except (ConfigError, ScenarioError, ExportError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
