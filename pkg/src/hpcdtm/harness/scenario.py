"""Test-case construction: workload mix, cooling, voltage domains, budgets and initial state."""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from ..actuators import DomainConfigError, DomainMap, OperatingGrid
from ..power import CorePowerParams, core_power
from ..thermal import CoolingKind
from ..workload import DEFAULT_CEFF, WorkloadClass


class Scenario(str, enum.Enum):
    MAX = "MAX-WL"
    MULTI = "MULTI-WL"
    CLOUD = "CLOUD-WL"


DOMAIN_CONFIGS = ("1D", "4D", "9D", "AD")
DEFAULT_BUDGET_FRACTIONS = (1.0, 0.6, 0.8, 0.4, 0.9)


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioSpec:
    """User-facing description of one test; :func:`build_scenario` resolves it."""

    workload: str = Scenario.MAX.value
    cooling: str = CoolingKind.WATER.value
    domains: str = "1D"
    n_c: int = 9
    duration: float = 2.0          # s
    seed: int = 0
    algorithm: str = "FCA"
    budget_fractions: tuple = DEFAULT_BUDGET_FRACTIONS
    init_band: tuple = (35.0, 65.0)  # degC, mean initial temperature drawn in this band
    ambient: float = 25.0
    T_L: float = 85.0
    noise: float = 1.0             # degC, 3-sigma sensor noise
    dt: float = 50e-6
    Ts: float = 500e-6
    f_multi: tuple = (3.45, 2.7, 0.4)  # GHz targets of vector / int-float / idle groups


@dataclass
class TestCase:
    spec: ScenarioSpec
    rows: int
    cols: int
    domain_map: DomainMap
    classes: list                  # WorkloadClass per core
    F_T: np.ndarray                # GHz per core
    budget_times: np.ndarray       # s, start of each budget level
    budget_values: np.ndarray      # W
    initial_temp: float            # degC, mean initial temperature
    initial_jitter_seed: int
    reference_power: float         # W, 100 % budget level
    possible_power: float          # W, largest chip power the targets could draw

    __test__ = False  # not a pytest class

    @property
    def n_c(self) -> int:
        return self.rows * self.cols

    @property
    def n_d(self) -> int:
        return self.domain_map.n_d

    def budget_at(self, t: float) -> float:
        k = np.searchsorted(self.budget_times, t, side="right") - 1
        return float(self.budget_values[max(k, 0)])

    def case_hash(self) -> str:
        payload = {
            "spec": asdict(self.spec),
            "membership": self.domain_map.membership.tolist(),
            "classes": [c.value for c in self.classes],
            "F_T": np.round(self.F_T, 9).tolist(),
            "budget": np.round(self.budget_values, 9).tolist(),
            "init": round(self.initial_temp, 9),
        }
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def _grid_shape(n_c: int):
    r = int(round(np.sqrt(n_c)))
    if r * r != n_c:
        raise ScenarioError(f"n_c={n_c} is not a square floorplan")
    return r, r


def domain_count(label: str, n_c: int) -> int:
    label = label.upper()
    if label == "AD":
        return n_c
    if label.endswith("D") and label[:-1].isdigit():
        n_d = int(label[:-1])
        if not 1 <= n_d <= n_c:
            raise ScenarioError(f"{label} needs between 1 and {n_c} domains")
        return n_d
    raise ScenarioError(f"unknown domain configuration {label!r}")


def _multi_classes(domains: DomainMap, rng: np.random.Generator):
    """Vector + int/float core in every multi-core domain, the rest idle.

    Per-core domains cannot mix groups; there a third of the cores are
    active (split between the two groups) and the rest idle.
    """
    n_c = domains.n_c
    cls = np.array([WorkloadClass.IDLE] * n_c, dtype=object)
    if np.all(domains.sizes == 1):
        n_act = max(2, n_c // 3)
        pick = rng.permutation(n_c)[:n_act]
        cls[pick[: (n_act + 1) // 2]] = WorkloadClass.VECTOR
        cls[pick[(n_act + 1) // 2:]] = WorkloadClass.INTFLOAT
        return list(cls)
    for cores in domains.cores:
        if len(cores) < 2:
            continue
        a, b = rng.choice(cores, size=2, replace=False)
        cls[a] = WorkloadClass.VECTOR
        cls[b] = WorkloadClass.INTFLOAT
    return list(cls)


def build_scenario(spec: ScenarioSpec, grid: OperatingGrid | None = None,
                   power: CorePowerParams | None = None) -> TestCase:
    """Resolve a spec into a fully determined test case (same spec -> same case)."""
    grid = grid or OperatingGrid.default()
    power = (power or CorePowerParams()).nominal()
    rows, cols = _grid_shape(spec.n_c)
    try:
        dm = DomainMap.blocks(rows, cols, domain_count(spec.domains, spec.n_c))
    except DomainConfigError as exc:
        raise ScenarioError(str(exc)) from exc
    if spec.duration <= 0 or spec.dt <= 0 or spec.Ts < spec.dt:
        raise ScenarioError("duration, dt and Ts must be positive with Ts >= dt")
    ratio = spec.Ts / spec.dt
    if abs(ratio - round(ratio)) > 1e-9:
        raise ScenarioError("control period must be a whole number of plant steps")
    try:
        scen = Scenario(spec.workload.upper())
    except ValueError:
        raise ScenarioError(f"unknown workload scenario {spec.workload!r}") from None
    CoolingKind(spec.cooling.upper())

    rng = np.random.default_rng([spec.seed, 7])
    f_vec, f_mix, f_idle = spec.f_multi
    if scen is Scenario.MAX:
        classes = [WorkloadClass.VECTOR] * spec.n_c
        F_T = np.full(spec.n_c, grid.f_max)
    elif scen is Scenario.CLOUD:
        classes = [WorkloadClass.CLOUD] * spec.n_c
        F_T = np.full(spec.n_c, grid.f_max)
    else:
        classes = _multi_classes(dm, rng)
        table = {WorkloadClass.VECTOR: f_vec, WorkloadClass.INTFLOAT: f_mix, WorkloadClass.IDLE: f_idle}
        F_T = np.array([table[c] for c in classes])
    F_T = grid.quantize_freq(F_T, "nearest")

    v_max = grid.v_max
    ref = spec.n_c * float(core_power(grid.f_max, v_max, spec.T_L, DEFAULT_CEFF[WorkloadClass.VECTOR], power))
    peak = {c: DEFAULT_CEFF.get(c, DEFAULT_CEFF[WorkloadClass.VECTOR]) for c in WorkloadClass}
    possible = float(np.sum([core_power(f, v_max, spec.T_L, peak[c], power) for f, c in zip(F_T, classes)]))
    n_b = len(spec.budget_fractions)
    times = spec.duration * np.arange(n_b) / n_b
    values = ref * np.asarray(spec.budget_fractions, dtype=float)
    lo, hi = spec.init_band
    init = float(rng.uniform(lo, hi))
    return TestCase(spec=spec, rows=rows, cols=cols, domain_map=dm, classes=classes, F_T=F_T,
                    budget_times=times, budget_values=values, initial_temp=init,
                    initial_jitter_seed=int(rng.integers(2**31)), reference_power=ref,
                    possible_power=possible)
