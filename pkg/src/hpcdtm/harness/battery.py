"""Cartesian test batteries, run serially or on a process pool."""

from __future__ import annotations

import itertools
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

from .metrics import Metrics, aggregate
from .run import PlantConfig, run_test
from .scenario import DOMAIN_CONFIGS, Scenario, ScenarioSpec, build_scenario

LABELS = ("algorithm", "workload", "cooling", "domains", "seed")


@dataclass(frozen=True)
class BatterySpec:
    workloads: tuple = tuple(s.value for s in Scenario)
    coolings: tuple = ("WATER", "AIR", "RACK")
    domains: tuple = DOMAIN_CONFIGS
    algorithms: tuple = ("VBA", "EBA", "FCA")
    seeds: tuple = tuple(range(10))
    base: ScenarioSpec = field(default_factory=ScenarioSpec)

    @classmethod
    def quick(cls, base: ScenarioSpec | None = None, **kw) -> "BatterySpec":
        return cls(base=replace(base or ScenarioSpec(), n_c=9), **kw)

    @classmethod
    def full(cls, base: ScenarioSpec | None = None, n_c: int = 36, **kw) -> "BatterySpec":
        return cls(base=replace(base or ScenarioSpec(), n_c=n_c), **kw)

    def specs(self) -> list:
        out = []
        for wl, cool, dom, alg, seed in itertools.product(self.workloads, self.coolings, self.domains,
                                                          self.algorithms, self.seeds):
            out.append(replace(self.base, workload=wl, cooling=cool, domains=dom, algorithm=alg,
                               seed=int(seed)))
        return out

    def __len__(self) -> int:
        return (len(self.workloads) * len(self.coolings) * len(self.domains) * len(self.algorithms)
                * len(self.seeds))


def run_one(spec: ScenarioSpec, plant: PlantConfig | None = None) -> dict:
    """One labelled result row: battery labels, case hash, wall time and every metric."""
    plant = plant or PlantConfig()
    case = build_scenario(spec, plant.grid, plant.power)
    t0 = time.perf_counter()
    _, m = run_test(case, plant)
    row = {"algorithm": spec.algorithm.upper(), "workload": spec.workload.upper(),
           "cooling": spec.cooling.upper(), "domains": spec.domains.upper(), "seed": spec.seed,
           "n_c": spec.n_c, "case_hash": case.case_hash()}
    row.update(m.as_dict())
    row["wall_time_s"] = time.perf_counter() - t0
    return row


def _run_packed(args):
    return run_one(*args)


@dataclass
class BatteryResult:
    rows: list
    wall_time_s: float = 0.0

    def metrics(self) -> list:
        return [Metrics.from_dict(r) for r in self.rows]

    def summary(self, group_by=("algorithm",)) -> dict:
        return aggregate(self.rows, group_by)

    def select(self, **labels) -> list:
        return [r for r in self.rows if all(r[k] == v for k, v in labels.items())]


def run_battery(battery: BatterySpec, plant: PlantConfig | None = None, workers: int = 1,
                progress=None) -> BatteryResult:
    """Run every case of ``battery``; rows come back in :meth:`BatterySpec.specs` order.

    Runs share no state, so ``workers > 1`` changes wall time only.
    ``progress(done, total, row)`` is called after each finished run.
    """
    plant = plant or PlantConfig()
    specs = battery.specs()
    t0 = time.perf_counter()
    rows = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for row in pool.map(_run_packed, [(s, plant) for s in specs], chunksize=4):
                rows.append(row)
                if progress:
                    progress(len(rows), len(specs), row)
    else:
        for s in specs:
            rows.append(run_one(s, plant))
            if progress:
                progress(len(rows), len(specs), rows[-1])
    return BatteryResult(rows=rows, wall_time_s=time.perf_counter() - t0)
