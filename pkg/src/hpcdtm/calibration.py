"""Least-squares fit of the power-model coefficients to operating-point anchors."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .power import CorePowerParams, core_power, static_power


@dataclass(frozen=True)
class PowerAnchor:
    """A power value (or power difference) the model must reproduce."""

    name: str
    target: float                 # W
    point: tuple                  # (F, V, T) evaluated with the vector workload
    minus: tuple | None = None    # optional second point, target = P(point) - P(minus)
    weight: float = 1.0


@dataclass(frozen=True)
class AnchorSet:
    anchors: tuple = (
        PowerAnchor("dP 2.85->2.90GHz @0.90V", 0.0627, (2.90, 0.90, 75.0), (2.85, 0.90, 75.0)),
        PowerAnchor("dP 2.90@0.90V->2.95@0.95V", 0.7407, (2.95, 0.95, 75.0), (2.90, 0.90, 75.0)),
        PowerAnchor("P 0.4GHz @Vmax", 5.52, (0.40, 1.20, 75.0)),
        # weaker "similar power" statements around the same figure
        PowerAnchor("P 3.0GHz @0.95V", 5.52, (3.00, 0.95, 75.0), weight=0.1),
        PowerAnchor("P 2.75GHz @0.85V", 3.8, (2.75, 0.85, 75.0), weight=0.1),
        PowerAnchor("P 1.85GHz @0.95V", 3.8, (1.85, 0.95, 75.0), weight=0.1),
    )
    leakage_ratio: float = 10.0   # exponential / linear static power at (v_max, t_max)
    v_max: float = 1.2
    t_max: float = 95.0


@dataclass
class CalibrationResult:
    params: CorePowerParams
    ceff_vector: float                       # nF
    residuals: dict = field(default_factory=dict)  # anchor name -> relative error

    def report(self) -> str:
        lines = [f"{k:32s} {v:+.3e}" for k, v in self.residuals.items()]
        lines.append(f"{'C_eff vector [nF]':32s} {self.ceff_vector:.6f}")
        lines += [f"{k:32s} {v:.6g}" for k, v in self.params.as_dict().items()]
        return "\n".join(lines)


def _unpack(theta):
    k_s0, i_cc, k_v, k_t, k_t0, ceff = theta
    return CorePowerParams(k_s0=k_s0, I_cc=i_cc, k_v=k_v, k_T=k_t, k_T0=k_t0), ceff


def _anchor_value(anchor: PowerAnchor, p, ceff):
    val = core_power(*anchor.point, ceff, p)
    if anchor.minus is not None:
        val = val - core_power(*anchor.minus, ceff, p)
    return float(val)


def leakage_ratio(p: CorePowerParams, v, t) -> float:
    return float(static_power(v, t, p) / static_power(v, t, p, exponential=False))


def _residuals(theta, anchors: AnchorSet):
    p, ceff = _unpack(theta)
    out = [a.weight * (_anchor_value(a, p, ceff) - a.target) / a.target for a in anchors.anchors]
    ratio = leakage_ratio(p, anchors.v_max, anchors.t_max)
    out.append((ratio - anchors.leakage_ratio) / anchors.leakage_ratio)
    return np.asarray(out)


def calibrate(anchors: AnchorSet = AnchorSet(), x0=(0.3, 0.5, 5.0, 0.03, -6.0, 1.5)) -> CalibrationResult:
    """Fit ``k_s0, I_cc, k_v, k_T, k_T0`` and the vector-class C_eff."""
    lo = [0.0, 1e-3, 0.0, 0.0, -50.0, 0.0]
    hi = [5.0, 50.0, 20.0, 0.2, 50.0, 10.0]
    sol = least_squares(_residuals, x0, bounds=(lo, hi), args=(anchors,), xtol=1e-14, ftol=1e-14,
                        gtol=1e-14)
    p, ceff = _unpack(sol.x)
    res = {a.name: (_anchor_value(a, p, ceff) - a.target) / a.target for a in anchors.anchors}
    res["static ratio @(Vmax,Tmax)"] = (leakage_ratio(p, anchors.v_max, anchors.t_max)
                                        - anchors.leakage_ratio) / anchors.leakage_ratio
    return CalibrationResult(params=p, ceff_vector=float(ceff), residuals=res)
