"""Cascade controller: power estimate, budget sharing, PI thermal cap, then back to (F, V).

The rail voltage used to estimate power comes from a moving average of the
frequency shortfall, so one period's capping does not immediately change the
voltage every core in the domain sees. A slow filter on the gap between
measured rail power and the estimate absorbs power-model error.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..actuators import min_voltage_for
from .base import PI, ControlCommand, Controller, ControllerInputs, PowerAdaptation, pid_step
from .distribution import _one_group, thermal_weight, water_fill_groups


@dataclass
class EbaGains:
    tau_ma: float = 1.25e-2        # s, voltage moving-average time constant
    tau_offset: float = 1.25e-2    # s, power-model adaptation filter
    thermal_kp: float = 0.6        # W/degC
    thermal_ki: float = 60.0       # W/(degC s)
    weight_scale: float = 10.0     # degC per e-fold of the sharing weight
    p_max: float = 18.0            # W, per-core ceiling of the thermal PI output
    offset_limit: float = 1.0      # W per core, bound on the adaptation term


@dataclass
class EbaState:
    F_MA: np.ndarray
    lambda_MA: float
    thermal: PI
    # commands of the last two periods; the older one was in force while the
    # latest rail power was measured (commands apply one period late)
    history: list = field(default_factory=list)


class EbaController(Controller):
    name = "EBA"

    def __init__(self, grid, domains, Ts=500e-6, estimator=None, gains: EbaGains | None = None):
        super().__init__(grid, domains, Ts, estimator)
        self.gains = g = gains or EbaGains()
        n = domains.n_c
        lam = Ts / g.tau_ma
        lam_o = Ts / g.tau_offset
        if not (0.0 < lam < 1.0 and 0.0 < lam_o <= 1.0):
            raise ValueError("filter time constants must exceed the control period")
        self.state = EbaState(
            F_MA=np.zeros(n), lambda_MA=lam,
            thermal=PI(g.thermal_kp, g.thermal_ki, 0.0, g.p_max, out=np.full(n, g.p_max),
                       prev_err=np.zeros(n)))
        self.adapt = PowerAdaptation(domains.n_d, lam_o, g.offset_limit)
        fv = np.asarray(min_voltage_for(grid.freq_levels, grid), dtype=float)
        self._fv = fv
        p = self.est.params
        self._leak_v = p.I_cc * fv * np.exp(p.k_v * fv)  # per frequency level, at f_V(F)
        self._dyn = grid.freq_levels * fv * fv

    def _pair_lookup(self, P_a, T, c):
        """Per core, the fastest grid (F, f_V(F)) pair whose estimated power fits ``P_a``."""
        g = self.grid
        p = self.est.params
        # leakage separates into a voltage factor and a temperature factor
        stat = p.k_s0 + np.multiply.outer(np.exp(p.k_T * T + p.k_T0), self._leak_v)
        f = g.freq_levels
        table = stat + np.multiply.outer(c, self._dyn)
        k = np.sum(table <= P_a[:, None] + 1e-9, axis=1) - 1
        return f[np.maximum(k, 0)]

    def step(self, inputs: ControllerInputs) -> ControlCommand:
        st, g, dom, gains = self.state, self.grid, self.domains, self.gains
        T = inputs.sensed_T
        c = np.maximum(inputs.workload_proxy, 1e-6)
        mem = dom.membership

        # adaptation against the command in force while the rail power was measured
        if len(st.history) == 2:
            F_old, V_old, granted, limited = st.history[0]
            model = dom.domain_sum(self.est.power(F_old, V_old[mem], T, c))
            self.adapt.update(inputs.rail_power, model, granted, limited, dom.sizes)

        # voltage from the moving-average frequency, max vote per domain
        f_vma = np.minimum(np.maximum(inputs.F_T - st.F_MA, g.f_min), g.f_max)
        V = self.domain_voltage(g.quantize_freq(f_vma, "up"))
        offset_core = (self.adapt.offset / dom.sizes)[mem]
        P_est = np.maximum(self.est.power(inputs.F_T, V[mem], T, c) + offset_core, 0.0)

        # budget sharing: chip budget first, then each rail's own budget
        floor = self.est.power(g.f_min, g.v_min, T, c) + offset_core
        w = np.maximum(P_est - floor, 1e-9) * thermal_weight(T, inputs.T_L, gains.weight_scale)
        one = _one_group(dom.n_c)
        grant, short1 = water_fill_groups(P_est, floor, w, np.array([inputs.P_B]), *one)
        grant, short2 = water_fill_groups(grant, floor, w, inputs.P_D, *self.layout)
        self.clamp_events += int(short1 or short2)

        # per-core thermal cap
        cap = pid_step(st.thermal, inputs.T_L - T, self.Ts)
        P_a = np.minimum(grant, cap) - offset_core

        # back to frequencies: each core asks for its best pair, the rail takes the highest
        # voltage asked, then every core refits its frequency at that voltage
        F_pair = np.minimum(self._pair_lookup(P_a, T, c), inputs.F_T)
        V_dom = self.domain_voltage(F_pair)
        f_at_v = self.est.freq_for(P_a, V_dom[mem], T, c)
        fmax_v = g.fmax_per_volt[g.nearest_volt_index(V_dom)][mem]
        F = np.minimum(np.maximum(f_at_v + 1e-9, g.f_min), fmax_v)
        cmd = self.finalize(F, inputs.F_T)

        st.F_MA = (1.0 - st.lambda_MA) * st.F_MA + st.lambda_MA * (inputs.F_T - cmd.F_a)
        target = dom.domain_sum(np.minimum(grant, cap))
        limited = dom.domain_sum((grant < P_est - 1e-9) | (cap < grant)) > 0
        st.history = st.history[-1:] + [(cmd.F_a, cmd.V, target, limited)]
        return cmd
