"""Fuzzy-capped controller with per-domain operating-point solving.

Thermal capping runs first and directly on frequency, so power granted
later is never thrown away by a thermal reduction. The surviving targets are
converted to power with the quadratic voltage bound, shared per domain and
solved back to (F, V) with the domain bisection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import ControlCommand, Controller, ControllerInputs, PowerAdaptation
from .bisection import TOL, conv2f_domains
from .distribution import fca_power_distribute, split_equal_frequency
from .fuzzy import FcaState, FuzzyLut, fca_cap_frequency, fca_fuzzy_update


@dataclass
class FcaGains:
    s: int = 2                   # periods spanned by the temperature difference
    beta: float = 0.5            # weight of the domain max temperature in the blend
    weight_scale: float = 10.0   # degC per e-fold of the domain sharing weight
    tau_offset: float = 1.25e-2  # s, power-model adaptation filter
    tol: float = TOL             # GHz, bisection tolerance
    offset_limit: float = 1.0    # W per core, bound on the adaptation term


class FcaController(Controller):
    name = "FCA"

    def __init__(self, grid, domains, Ts=500e-6, estimator=None, gains: FcaGains | None = None,
                 lut: FuzzyLut | None = None):
        super().__init__(grid, domains, Ts, estimator)
        self.gains = g = gains or FcaGains()
        self.lut = lut or FuzzyLut()
        self.state = FcaState.for_grid(domains.n_c, grid, s=g.s)
        self.adapt = PowerAdaptation(domains.n_d, Ts / g.tau_offset, g.offset_limit)
        self.history = []
        self.last_conv = None

    def step(self, inputs: ControllerInputs) -> ControlCommand:
        g, dom, gains = self.grid, self.domains, self.gains
        T = inputs.sensed_T
        c = np.maximum(inputs.workload_proxy, 1e-6)
        mem = dom.membership

        if len(self.history) == 2:
            F_old, V_old, granted, limited = self.history[0]
            model = dom.domain_sum(self.est.power(F_old, V_old[mem], T, c))
            self.adapt.update(inputs.rail_power, model, granted, limited, dom.sizes)
        offset_core = (self.adapt.offset / dom.sizes)[mem]

        fuzzy = fca_fuzzy_update(T, self.state, self.lut, inputs.T_L)
        F_cap = fca_cap_frequency(inputs.F_T, fuzzy, g)

        v_est = g.quad_voltage(dom.domain_max(F_cap))[mem]
        P_est = self.est.power(F_cap, v_est, T, c) + offset_core
        floor = self.est.power(g.f_min, g.quad_voltage(g.f_min), T, c) + offset_core

        def split(grant_d):
            return split_equal_frequency(grant_d, F_cap, T, c, offset_core, dom, g, self.est,
                                         layout=self.layout)

        grants, _, short = fca_power_distribute(inputs.P_D, P_est, floor, T, c, dom, inputs.P_B,
                                                inputs.T_L, gains.beta, gains.weight_scale,
                                                layout=self.layout, split=split)
        conv = conv2f_domains(grants - offset_core, T, c, dom, g, self.est, gains.tol,
                              layout=self.layout)
        self.clamp_events += conv.clamped + int(short)
        self.last_conv = conv
        # a core whose request was granted in full should land on its cap, not one step below
        full = grants >= P_est - 1e-9
        F = np.where(full, np.maximum(conv.F_q, g.quantize_freq(conv.F + gains.tol, "down")), conv.F_q)
        cmd = self.finalize(np.minimum(F, F_cap), inputs.F_T)
        limited = dom.domain_sum(grants < P_est - 1e-9) > 0
        self.history = self.history[-1:] + [(cmd.F_a, cmd.V, dom.domain_sum(grants), limited)]
        return cmd
