"""Model-in-the-loop execution of one test case."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..actuators import ActuatorState, OperatingGrid
from ..controllers import ControllerInputs, make_controller
from ..plant import advance_block
from ..power import CorePowerParams, apply_process_variation
from ..thermal import (CoolingVariant, Floorplan, MaterialProps, NoiseSpec, build_thermal_network,
                       discretize, sense_temperatures)
from ..workload import TraceBank, generate_trace
from .metrics import Metrics, compute_metrics
from .scenario import TestCase


@dataclass
class PlantConfig:
    """Chip-level model parameters shared by every test of a battery."""

    materials: MaterialProps = field(default_factory=MaterialProps)
    power: CorePowerParams = field(default_factory=CorePowerParams)
    grid: OperatingGrid = field(default_factory=OperatingGrid.default)
    cooling: dict = field(default_factory=dict)  # kind -> CoolingVariant override
    chip_seed: int = 2024        # process variation, constant across tests
    power_spread: float = 0.1    # +- fraction on I_cc and C_eff
    thermal_spread: float = 0.05  # +- fraction on silicon C and die->spreader R
    vrm_delay: float = 50e-6
    init_jitter: float = 1.0     # degC spread of the initial state around its mean
    controller_gains: dict = field(default_factory=dict)  # algorithm -> gains dataclass
    controller_luts: dict = field(default_factory=dict)   # algorithm -> FuzzyLut
    ceff_table: dict | None = None  # WorkloadClass -> nF, None keeps the calibrated table

    def cooling_variant(self, kind: str) -> CoolingVariant:
        return self.cooling.get(kind.upper()) or CoolingVariant.named(kind)

    def chip(self, n_c: int):
        """Process-varied power parameters and thermal scales for an ``n_c``-core chip."""
        rng = np.random.default_rng([self.chip_seed, n_c])
        p = apply_process_variation(self.power, n_c, self.power_spread, rng)
        cap = 1.0 + self.thermal_spread * rng.uniform(-1, 1, n_c)
        res = 1.0 + self.thermal_spread * rng.uniform(-1, 1, n_c)
        return p, cap, res


@dataclass
class RunRecord:
    """Time series of one run. Plant-step arrays have one row per 50 us step."""

    dt: float
    Ts: float
    T_true: np.ndarray        # (N, n_c) silicon temperature after each step
    P_core: np.ndarray        # (N, n_c)
    ceff: np.ndarray          # (N, n_c) mean C_eff executed per step
    F_applied: np.ndarray     # (N, n_c)
    V_core: np.ndarray        # (N, n_c) supply voltage seen by each core
    V_domain: np.ndarray      # (N, n_d)
    budget: np.ndarray        # (N,)
    T_sensed: np.ndarray      # (K, n_c) readings handed to the controller
    P_rail: np.ndarray        # (K, n_d) per-rail mean power handed to the controller
    F_cmd: np.ndarray         # (K, n_c) command computed at each control instant
    F_T: np.ndarray           # (n_c,)
    membership: np.ndarray
    cycles: np.ndarray        # (n_c,) executed cycles
    states: np.ndarray | None = None  # (N, n_s) full thermal state, optional
    aborted: bool = False
    steps_done: int = 0
    violations: int = 0       # clamped command pieces
    deferred: int = 0         # core-steps held back by a pending voltage rise
    clamp_events: int = 0     # controller-side clamps
    manifest: dict = field(default_factory=dict)

    @property
    def reference_cycles(self) -> np.ndarray:
        return self.F_T * 1e9 * self.dt * len(self.budget)

    @property
    def time(self) -> np.ndarray:
        return self.dt * np.arange(1, len(self.budget) + 1)


def run_test(case: TestCase, plant: PlantConfig | None = None, record_states=False,
             controller=None, uncontrolled=None, initial_state=None):
    """Simulate one test case and return (RunRecord, Metrics).

    ``uncontrolled=(F, V)`` pins every core to that operating point and skips
    the controller. A diverging state stops the run and marks it aborted.
    """
    plant = plant or PlantConfig()
    spec = case.spec
    grid = plant.grid
    n_c, dm = case.n_c, case.domain_map
    n_d = dm.n_d
    fp = Floorplan(case.rows, case.cols)
    params, cap_s, res_s = plant.chip(n_c)
    net = build_thermal_network(fp, plant.materials, plant.cooling_variant(spec.cooling),
                                ambient_temp=spec.ambient, cap_scale=cap_s, res_scale=res_s)
    jit_rng = np.random.default_rng(case.initial_jitter_seed)
    if initial_state is None:
        initial_state = case.initial_temp + plant.init_jitter * jit_rng.uniform(-1, 1, net.n_s)
    model = discretize(net, spec.dt, initial_state=initial_state)
    sensor_rng = np.random.default_rng([spec.seed, 11])
    noise = NoiseSpec(spec.noise)

    steps_per = int(round(spec.Ts / spec.dt))
    K = int(round(spec.duration / spec.Ts))
    N = K * steps_per
    cycles_needed = int(grid.f_max * 1e9 * spec.duration) + 1
    traces = []
    for i, cls in enumerate(case.classes):
        trng = np.random.default_rng([spec.seed, 13, i])
        traces.append(generate_trace(cls, cycles_needed, trng, ceff_table=plant.ceff_table))
    bank = TraceBank(traces)
    pos = np.zeros(n_c)

    if controller is None and uncontrolled is None:
        alg = spec.algorithm.upper()
        controller = make_controller(alg, grid, dm, Ts=spec.Ts, gains=plant.controller_gains.get(alg),
                                     lut=plant.controller_luts.get(alg))
    act = ActuatorState(grid, dm, vrm_delay=plant.vrm_delay)
    if uncontrolled is not None:
        F_u, V_u = uncontrolled
        act.apply_commands(np.full(n_c, F_u), np.full(n_d, V_u), -1.0)
        act.effective(0.0)

    out_T = np.empty((N, n_c))
    out_P = np.empty((N, n_c))
    out_c = np.empty((N, n_c))
    F_app = np.empty((N, n_c))
    V_core = np.empty((N, n_c))
    V_dom = np.empty((N, n_d))
    budget = np.empty(N)
    T_sens = np.full((K, n_c), np.nan)
    P_rail = np.full((K, n_d), np.nan)
    F_cmd = np.full((K, n_c), np.nan)
    states = np.empty((N, net.n_s)) if record_states else None

    i_cc = np.asarray(params.I_cc * params.icc_scale * np.ones(n_c), dtype=float)
    c_sc = np.asarray(params.ceff_scale * np.ones(n_c), dtype=float)
    mem = dm.membership
    F_seq = np.empty((steps_per, n_c))
    V_seq = np.empty((steps_per, n_c))
    Vd_seq = np.empty((steps_per, n_d))
    pending = None
    inv_n = 1.0 / steps_per
    aborted = False
    done = 0
    t0 = time.perf_counter()
    for k in range(K):
        t_k = k * spec.Ts
        P_B = case.budget_at(t_k)
        if k > 0 and controller is not None:
            sl = slice((k - 1) * steps_per, k * steps_per)
            sensed = sense_temperatures(model.state, model.C_out, noise, sensor_rng)
            rails = dm.domain_sum(out_P[sl].sum(axis=0) * inv_n)
            inputs = ControllerInputs(sensed_T=sensed, rail_power=rails, F_T=case.F_T, P_B=P_B,
                                      P_D=P_B * dm.sizes / n_c, workload_proxy=out_c[sl].sum(axis=0) * inv_n,
                                      T_L=spec.T_L, now=t_k)
            cmd = controller.step(inputs)
            T_sens[k], P_rail[k], F_cmd[k] = sensed, rails, cmd.F_a
            # decided now, applied at the next control boundary
            if pending is not None:
                act.apply_commands(pending.F_a, pending.V, t_k)
            pending = cmd
        F_s, V_s = act.effective(t_k)
        F_seq[:], Vd_seq[:] = F_s, V_s
        s = 1
        while act.has_pending and s < steps_per:
            F_seq[s:], Vd_seq[s:] = act.effective(t_k + s * spec.dt)
            s += 1
        V_seq[:] = Vd_seq[:, mem]
        sl = slice(k * steps_per, (k + 1) * steps_per)
        n_ok = advance_block(model.state, model.Ad, model.Bd, model.bd_amb, spec.ambient, spec.dt,
                           F_seq, V_seq, pos, bank.edges, bank.cum, bank.offsets, params.k_s0, i_cc,
                           params.k_v, params.k_T, params.k_T0, c_sc, out_T[sl], out_P[sl], out_c[sl])
        F_app[sl], V_core[sl], V_dom[sl] = F_seq, V_seq, Vd_seq
        budget[sl] = P_B
        if states is not None:
            states[sl] = model.state  # end-of-period state repeated; coarse but cheap
        done = k * steps_per + n_ok
        if n_ok < steps_per:
            aborted = True
            break
    elapsed = time.perf_counter() - t0

    if aborted:
        out_T, out_P, out_c = out_T[:done], out_P[:done], out_c[:done]
        F_app, V_core, V_dom, budget = F_app[:done], V_core[:done], V_dom[:done], budget[:done]
        if states is not None:
            states = states[:done]
    rec = RunRecord(
        dt=spec.dt, Ts=spec.Ts, T_true=out_T, P_core=out_P, ceff=out_c, F_applied=F_app,
        V_core=V_core, V_domain=V_dom, budget=budget, T_sensed=T_sens, P_rail=P_rail, F_cmd=F_cmd,
        F_T=case.F_T.copy(), membership=mem.copy(), cycles=pos.copy(), states=states,
        aborted=aborted, steps_done=done, violations=act.report.violations,
        deferred=act.report.deferred,
        clamp_events=getattr(controller, "clamp_events", 0) if controller is not None else 0,
        manifest={"case_hash": case.case_hash(), "seed": spec.seed, "chip_seed": plant.chip_seed,
                  "algorithm": spec.algorithm if uncontrolled is None else "NONE",
                  "wall_time_s": elapsed},
    )
    return rec, compute_metrics(rec, case, grid)
