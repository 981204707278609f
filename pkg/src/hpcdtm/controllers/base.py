"""Controller interface and primitives shared by the three algorithms."""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np

from ..actuators import DomainMap, OperatingGrid
from ..power import CorePowerParams
from .distribution import csr

T_LIMIT = 85.0  # degC, soft capping limit (configuration, not a measured figure)
T_CRIT = 95.0   # degC, hard limit


@dataclass
class ControllerInputs:
    """Everything a controller may observe at one control instant.

    Temperatures are the noisy sensor readings, power is per rail only, and
    the workload proxy is last period's mean C_eff per core.
    """

    sensed_T: np.ndarray       # degC per core
    rail_power: np.ndarray     # W per domain, mean over the last period
    F_T: np.ndarray            # GHz per core
    P_B: float                 # W, chip budget
    P_D: np.ndarray            # W per domain
    workload_proxy: np.ndarray  # nF per core
    T_L: float = T_LIMIT
    now: float = 0.0

    @property
    def total_power(self) -> float:
        return float(np.sum(self.rail_power))


@dataclass
class ControlCommand:
    F_a: np.ndarray  # GHz per core, grid levels
    V: np.ndarray    # V per domain, grid levels


@dataclass
class PI:
    """Incremental (velocity-form) PI with the output clamped to ``[lo, hi]``.

    Clamping the output rather than an integrator term is the anti-windup:
    the state cannot drift past a saturated actuator.
    """

    kp: float
    ki: float
    lo: np.ndarray | float
    hi: np.ndarray | float
    out: np.ndarray | float = 0.0
    prev_err: np.ndarray | float = 0.0
    kd: float = 0.0
    prev_prev_err: np.ndarray | float = 0.0

    def reset(self, out, err=0.0):
        self.out = out
        self.prev_err = err
        self.prev_prev_err = err


def pid_step(pid: PI, error, Ts: float):
    """Advance ``pid`` by one period and return the new (clamped) output."""
    if Ts <= 0:
        raise ValueError("Ts must be positive")
    error = np.asarray(error, dtype=float)
    du = pid.kp * (error - pid.prev_err) + pid.ki * Ts * error
    if pid.kd:
        du = du + pid.kd / Ts * (error - 2.0 * pid.prev_err + pid.prev_prev_err)
    pid.out = np.minimum(np.maximum(pid.out + du, pid.lo), pid.hi)
    pid.prev_prev_err = pid.prev_err
    pid.prev_err = error
    return pid.out


@dataclass
class PowerEstimator:
    """The controller's own power model h_est(F, V, T, C_eff).

    Built from nominal coefficients; any gap to the plant (process variation,
    workload noise) is the controller's problem.
    """

    params: CorePowerParams = field(default_factory=CorePowerParams)

    def static(self, V, T):
        p = self.params
        return p.k_s0 + p.I_cc * V * np.exp(p.k_v * V + p.k_T * T + p.k_T0)

    def power(self, F, V, T, ceff):
        return self.static(V, T) + ceff * F * V * V

    def freq_for(self, P, V, T, ceff):
        """Continuous frequency that makes h_est equal ``P`` at voltage ``V`` (may be out of range)."""
        V = np.asarray(V, dtype=float)
        c = np.maximum(np.asarray(ceff, dtype=float), 1e-6)
        return (np.asarray(P) - self.static(V, T)) / (c * V * V)


class PowerAdaptation:
    """Per-domain correction added to the controller's power estimates.

    Updated once per period from the rail power measured under the command
    that was in force. Where the budget was binding, the gap to the granted
    power is integrated, so quantization and voltage-bound losses are won
    back; elsewhere the term relaxes toward the plain model error. The term
    is bounded per core as anti-windup.
    """

    def __init__(self, n_d: int, lam: float, limit: float):
        if not 0.0 < lam <= 1.0:
            raise ValueError("adaptation gain must lie in (0, 1]")
        self.lam = lam
        self.limit = limit
        self.offset = np.zeros(n_d)  # W per domain

    def update(self, rail_power, model_power, granted, limited, sizes):
        model_gap = rail_power - model_power
        grant_gap = rail_power - granted
        self.offset += self.lam * np.where(limited, grant_gap, model_gap - self.offset)
        lim = self.limit * sizes
        self.offset = np.minimum(np.maximum(self.offset, -lim), lim)
        return self.offset


class Controller(ABC):
    """Periodic low-level controller: one :meth:`step` per control period."""

    name = "base"

    def __init__(self, grid: OperatingGrid, domains: DomainMap, Ts: float = 500e-6,
                 estimator: PowerEstimator | None = None):
        self.grid = grid
        self.domains = domains
        self.Ts = Ts
        self.est = estimator or PowerEstimator()
        self.layout = csr(domains)
        self.clamp_events = 0
        self.trace = None  # optional list of per-step internals

    @abstractmethod
    def step(self, inputs: ControllerInputs) -> ControlCommand:
        ...

    def domain_voltage(self, F):
        """Shared rail voltage from the fastest core of each domain."""
        g = self.grid
        fmax_dom = self.domains.domain_max(F)
        idx = np.searchsorted(g.fmax_per_volt, fmax_dom - 1e-9)
        return g.volt_levels[np.minimum(idx, len(g.volt_levels) - 1)]

    def finalize(self, F, F_T) -> ControlCommand:
        """Quantize down, never exceed targets, pick rail voltages; always feasible."""
        g = self.grid
        F = np.maximum(np.minimum(F, F_T), g.f_min)
        F = g.quantize_freq(F, "down")
        return ControlCommand(F_a=F, V=self.domain_voltage(F))
