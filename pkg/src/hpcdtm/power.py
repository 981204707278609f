"""Per-core power model with exponential leakage, process variation and rail aggregation.

Units: F in GHz, V in volts, T in degC, effective capacitance in nF, so that
``C_eff * F * V**2`` is in watts.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .actuators import DomainConfigError, DomainMap, OperatingGrid


class PowerConstraintError(ValueError):
    """An (F, V) pair outside the feasible F-V region was fed to the plant."""


@dataclass(frozen=True)
class CorePowerParams:
    """Coefficients of ``P = k_s0 + I_cc*V*K(T, V) + C_eff*F*V^2``.

    ``icc_scale`` and ``ceff_scale`` hold the per-core process-variation
    multipliers; they are scalars for a nominal core and arrays after
    :func:`apply_process_variation`.
    """

    # defaults produced by calibration.calibrate()
    k_s0: float = 0.2624023290257558     # W
    I_cc: float = 0.4695051779257101     # A
    k_v: float = 5.141377502258816       # 1/V
    k_T: float = 0.030254545242254037    # 1/degC
    k_T0: float = -6.391178622640258
    icc_scale: object = 1.0
    ceff_scale: object = 1.0

    def __post_init__(self):
        if self.k_s0 < 0:
            raise ValueError("k_s0 must be non-negative")
        if self.I_cc <= 0:
            raise ValueError("I_cc must be positive")

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("k_s0", "I_cc", "k_v", "k_T", "k_T0")}

    def nominal(self) -> "CorePowerParams":
        return replace(self, icc_scale=1.0, ceff_scale=1.0)


def leakage_factor(T, V, p: CorePowerParams):
    """Exponential leakage multiplier ``exp(k_v V + k_T T + k_T0)``."""
    return np.exp(p.k_v * np.asarray(V) + p.k_T * np.asarray(T) + p.k_T0)


def static_power(V, T, p: CorePowerParams, exponential=True):
    """Static part of the core power. ``exponential=False`` gives the linear (K = 1) model."""
    k = leakage_factor(T, V, p) if exponential else 1.0
    return p.k_s0 + p.I_cc * p.icc_scale * np.asarray(V) * k


def dynamic_power(F, V, avg_ceff, p: CorePowerParams):
    V = np.asarray(V)
    return p.ceff_scale * np.asarray(avg_ceff) * np.asarray(F) * V * V


def core_power(F, V, T, avg_ceff, p: CorePowerParams, grid: OperatingGrid | None = None):
    """Average core power in watts over a simulation step.

    When ``grid`` is given the (F, V) pairs are checked against the F-V table
    and an infeasible pair raises :class:`PowerConstraintError`.
    """
    if grid is not None:
        V_arr = np.asarray(V, dtype=float)
        idx = np.clip(np.searchsorted(grid.volt_levels, V_arr - 1e-6), 0, len(grid.volt_levels) - 1)
        cap = grid.fmax_per_volt[idx]
        if np.any(np.asarray(F) > cap + 1e-9) or np.any(np.asarray(F) < grid.f_min - 1e-9):
            raise PowerConstraintError(f"infeasible operating point F={F}, V={V}")
    return static_power(V, T, p) + dynamic_power(F, V, avg_ceff, p)


def apply_process_variation(base: CorePowerParams, n_cores: int, spread: float,
                            rng: np.random.Generator) -> CorePowerParams:
    """Per-core multiplicative perturbation of I_cc and C_eff, uniform in ``1 +- spread``."""
    if not 0.0 <= spread <= 0.1:
        raise ValueError("spread must lie in [0, 0.1]")
    icc = 1.0 + spread * rng.uniform(-1.0, 1.0, n_cores)
    ceff = 1.0 + spread * rng.uniform(-1.0, 1.0, n_cores)
    return replace(base, icc_scale=icc, ceff_scale=ceff)


@dataclass
class PowerReading:
    per_rail: np.ndarray  # W per voltage domain
    total: float          # W
    timestamp: float = 0.0


def rail_power(core_powers, domains: DomainMap, timestamp=0.0) -> PowerReading:
    """Sum per-core powers into per-rail measurements; per-core values are not exposed."""
    core_powers = np.asarray(core_powers, dtype=float)
    if len(core_powers) != domains.n_c:
        raise DomainConfigError("core count does not match the domain map")
    per_rail = domains.domain_sum(core_powers)
    return PowerReading(per_rail=per_rail, total=float(per_rail.sum()), timestamp=timestamp)
