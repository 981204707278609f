"""CSV/JSON writers and readers for runs and batteries."""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .battery import LABELS, BatteryResult
from .metrics import Metrics, aggregate
from .run import RunRecord

GROUPINGS = (("algorithm",), ("algorithm", "workload"), ("algorithm", "domains"),
             ("algorithm", "cooling"), ("algorithm", "seed"))
_INT_LABELS = ("seed", "n_c")


class ExportError(OSError):
    pass


def _open(path: Path, mode: str):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return open(path, mode, newline="")
    except OSError as exc:
        raise ExportError(f"{path}: {exc.strerror or exc}") from exc


def run_csv_columns(n_c: int, n_d: int) -> list:
    cols = ["time", "budget", "P_total"]
    for name in ("T", "P", "F", "V", "ceff"):
        cols += [f"{name}_{i}" for i in range(n_c)]
    cols += [f"Vdom_{j}" for j in range(n_d)]
    return cols


def write_run_csv(record: RunRecord, path) -> Path:
    """Plant-step time series of one run, one row per 50 us step."""
    path = Path(path)
    n_c, n_d = record.T_true.shape[1], record.V_domain.shape[1]
    data = np.column_stack([record.time, record.budget, record.P_core.sum(axis=1), record.T_true,
                            record.P_core, record.F_applied, record.V_core, record.ceff,
                            record.V_domain])
    with _open(path, "w") as fh:
        fh.write(",".join(run_csv_columns(n_c, n_d)) + "\n")
        np.savetxt(fh, data, delimiter=",", fmt="%.10g")
    return path


def write_controller_csv(record: RunRecord, path) -> Path:
    """Per control period: sensed temperatures, rail powers and commanded frequencies."""
    path = Path(path)
    K, n_c = record.F_cmd.shape
    n_d = record.P_rail.shape[1]
    t = record.Ts * np.arange(K)
    cols = (["time"] + [f"Tsens_{i}" for i in range(n_c)] + [f"Prail_{j}" for j in range(n_d)]
            + [f"Fcmd_{i}" for i in range(n_c)])
    with _open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        np.savetxt(fh, np.column_stack([t, record.T_sensed, record.P_rail, record.F_cmd]),
                   delimiter=",", fmt="%.10g")
    return path


def read_run_csv(path) -> dict:
    path = Path(path)
    try:
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
    except OSError as exc:
        raise ExportError(f"{path}: {exc.strerror or exc}") from exc
    return {name: data[:, i] for i, name in enumerate(header)}


def result_columns() -> list:
    return list(LABELS) + ["n_c", "case_hash"] + Metrics.names() + ["wall_time_s"]


def write_results_csv(rows, path) -> Path:
    """Wide table: one row per run, labels then every metric (``repr`` keeps floats exact)."""
    path = Path(path)
    cols = result_columns()
    with _open(path, "w") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in rows:
            w.writerow([repr(r[c]) if isinstance(r[c], float) else r[c] for c in cols])
    return path


def read_results_csv(path) -> list:
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            raw = list(csv.DictReader(fh))
    except OSError as exc:
        raise ExportError(f"{path}: {exc.strerror or exc}") from exc
    int_metrics = {f for f, v in Metrics().as_dict().items() if isinstance(v, int)}
    rows = []
    for r in raw:
        out = {}
        for k, v in r.items():
            if k in _INT_LABELS or k in int_metrics:
                out[k] = int(v)
            elif k in LABELS or k == "case_hash":
                out[k] = v
            else:
                out[k] = float(v)
        rows.append(out)
    return rows


def write_long_csv(rows, path) -> Path:
    """Plot-ready long format keyed by (algorithm, scenario, cooling, domains, seed, metric)."""
    path = Path(path)
    with _open(path, "w") as fh:
        w = csv.writer(fh)
        w.writerow(["algorithm", "scenario", "cooling", "domains", "seed", "metric", "value"])
        for r in rows:
            for m in Metrics.names():
                w.writerow([r["algorithm"], r["workload"], r["cooling"], r["domains"], r["seed"], m,
                            repr(float(r[m]))])
    return path


def _keyed(stats: dict) -> dict:
    return {"|".join(str(k) for k in key): v for key, v in stats.items()}


def summary_digest(summary: dict) -> str:
    return hashlib.sha256(json.dumps(summary, sort_keys=True).encode()).hexdigest()


def build_summary(rows, groupings=GROUPINGS, manifest: dict | None = None) -> dict:
    """Aggregates for every grouping, each with its digest, plus raw per-group value lists."""
    groups = {}
    for by in groupings:
        stats = _keyed(aggregate(rows, by))
        groups["+".join(by)] = {"group_by": list(by), "stats": stats, "digest": summary_digest(stats)}
    dist = {}
    for r in rows:
        for m in Metrics.names():
            dist.setdefault(r["algorithm"], {}).setdefault(m, []).append(float(r[m]))
    return {"manifest": manifest or {}, "n_runs": len(rows), "groups": groups,
            "distributions": dist}


def write_summary_json(rows, path, groupings=GROUPINGS, manifest: dict | None = None) -> Path:
    path = Path(path)
    with _open(path, "w") as fh:
        json.dump(build_summary(rows, groupings, manifest), fh, indent=1, sort_keys=True)
    return path


def read_summary_json(path) -> dict:
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except OSError as exc:
        raise ExportError(f"{path}: {exc.strerror or exc}") from exc


def export_battery(result: BatteryResult, out_dir, manifest: dict | None = None) -> dict:
    """Write results.csv, long.csv and summary.json under ``out_dir``; returns their paths."""
    out = Path(out_dir)
    man = dict(manifest or {})
    man.setdefault("wall_time_s", result.wall_time_s)
    return {"results": write_results_csv(result.rows, out / "results.csv"),
            "long": write_long_csv(result.rows, out / "long.csv"),
            "summary": write_summary_json(result.rows, out / "summary.json", manifest=man)}
