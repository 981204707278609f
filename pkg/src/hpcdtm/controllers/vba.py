"""Voting-box controller: independent frequency candidates, the smallest one wins."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import PI, ControlCommand, Controller, ControllerInputs, pid_step


@dataclass
class VbaGains:
    thermal_kp: float = 0.02     # GHz/degC
    thermal_ki: float = 6.0      # GHz/(degC s)
    power_kp: float = 0.03       # GHz/W, on the per-core share of the budget error
    power_ki: float = 15.0       # GHz/(W s)
    thermal_margin: float = 2.0  # degC below T_L used as set point
    power_margin: float = 0.08   # fraction of P_B held back by the power loop


class VbaController(Controller):
    """Per core: min(target, thermal PI candidate, chip power PI candidate).

    The power loop produces one frequency ceiling shared by every core, so
    the chip budget is met by pulling all fast cores down alike. Rail
    voltage follows the fastest core of each domain.
    """

    name = "VBA"

    def __init__(self, grid, domains, Ts=500e-6, estimator=None, gains: VbaGains | None = None):
        super().__init__(grid, domains, Ts, estimator)
        self.gains = gains or VbaGains()
        n = domains.n_c
        g = self.gains
        self.thermal = PI(g.thermal_kp, g.thermal_ki, grid.f_min, grid.f_max,
                          out=np.full(n, grid.f_max), prev_err=np.zeros(n))
        self.power = PI(g.power_kp, g.power_ki, grid.f_min, grid.f_max, out=grid.f_max)

    def candidates(self, inputs: ControllerInputs):
        g = self.gains
        e_t = inputs.T_L - g.thermal_margin - inputs.sensed_T
        f_th = pid_step(self.thermal, e_t, self.Ts)
        e_p = (inputs.P_B * (1.0 - g.power_margin) - inputs.total_power) / self.domains.n_c
        f_pw = pid_step(self.power, e_p, self.Ts)
        return inputs.F_T, f_th, np.full(self.domains.n_c, float(f_pw))

    def step(self, inputs: ControllerInputs) -> ControlCommand:
        f_t, f_th, f_pw = self.candidates(inputs)
        F = np.minimum(np.minimum(f_t, f_th), f_pw)
        return self.finalize(F, inputs.F_T)
