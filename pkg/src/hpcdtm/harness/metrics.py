"""Per-run figures of merit and their aggregation over a battery."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from ..actuators import OperatingGrid


@dataclass
class Metrics:
    thermal_exceeded_max: float = 0.0     # degC above T_L, worst core and instant
    thermal_exceeded_time: float = 0.0    # % of plant steps with any core above T_L
    thermal_exceeded_core_time: float = 0.0  # % of (step, core) samples above T_L
    power_exceeded_avg: float = 0.0       # % mean relative excess over steps that exceed
    power_exceeded_time: float = 0.0      # % of steps above budget, among steps where possible
    target_l2: float = 0.0                # GHz, RMS over cores of F_T - F_a, averaged over periods
    target_l2_rate: float = 0.0           # GHz/s, sum_k |dF_k|_2 / Ts / (n_c N)
    av_wlp: float = 100.0                 # % mean executed work vs. uncontrolled at target
    min_wlp: float = 100.0                # % of the most throttled core
    avg_temp: float = 0.0                 # degC
    max_temp: float = 0.0                 # degC
    total_energy: float = 0.0             # J
    fv_violations: int = 0                # plant steps with an infeasible (F, V) pair
    domain_incoherence: int = 0           # plant steps where a domain's cores saw different V
    command_violations: int = 0           # clamped command pieces at the actuators
    deferred_steps: int = 0               # core-steps waiting on a voltage rise
    clamp_events: int = 0                 # controller-side budget/band clamps
    aborted: int = 0                      # 1 if the state diverged

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def names(cls) -> list:
        return [f.name for f in fields(cls)]

    @classmethod
    def from_dict(cls, d: dict) -> "Metrics":
        kw = {}
        for f in fields(cls):
            if f.name in d:
                kw[f.name] = int(d[f.name]) if f.type in ("int", int) else float(d[f.name])
        return cls(**kw)


def fv_scan(F, V_core, grid: OperatingGrid) -> np.ndarray:
    """Per plant step: True where some core's (F, V) pair is off-grid or above fmax(V)."""
    vi = np.clip(np.searchsorted(grid.volt_levels, V_core - 1e-6), 0, len(grid.volt_levels) - 1)
    off_v = np.abs(grid.volt_levels[vi] - V_core) > 1e-6
    off_f = np.abs(grid.quantize_freq(F, "nearest") - F) > 1e-6
    over = F > grid.fmax_per_volt[vi] + 1e-9
    under = F < grid.f_min - 1e-9
    return np.any(off_v | off_f | over | under, axis=1)


def incoherence_scan(V_core, membership) -> np.ndarray:
    """Per plant step: True where two cores of one domain saw different voltages."""
    bad = np.zeros(V_core.shape[0], dtype=bool)
    for d in np.unique(membership):
        v = V_core[:, membership == d]
        bad |= np.ptp(v, axis=1) > 1e-12
    return bad


def compute_metrics(record, case, grid: OperatingGrid) -> Metrics:
    T = record.T_true
    T_L = case.spec.T_L
    n_steps = len(record.budget)
    if n_steps == 0:
        return Metrics(aborted=int(record.aborted))
    over_T = T - T_L
    any_over = np.any(over_T > 0, axis=1)

    P_tot = record.P_core.sum(axis=1)
    possible = record.budget < case.possible_power
    exceed = (P_tot > record.budget) & possible
    if np.any(exceed):
        rel = (P_tot[exceed] - record.budget[exceed]) / record.budget[exceed]
        p_avg = 100.0 * float(np.mean(rel))
    else:
        p_avg = 0.0
    p_time = 100.0 * np.count_nonzero(exceed) / np.count_nonzero(possible) if np.any(possible) else 0.0

    cmd = record.F_cmd[~np.isnan(record.F_cmd).any(axis=1)]
    if len(cmd):
        dF = record.F_T[None, :] - cmd
        norms = np.linalg.norm(dF, axis=1)
        l2 = float(np.mean(norms) / np.sqrt(len(record.F_T)))
        l2_rate = float(np.sum(norms / record.Ts) / (len(record.F_T) * len(cmd)))
    else:
        l2 = l2_rate = 0.0

    ref = record.F_T * 1e9 * record.dt * n_steps
    wlp = np.minimum(100.0, 100.0 * record.cycles / ref)
    return Metrics(
        thermal_exceeded_max=float(max(0.0, over_T.max())),
        thermal_exceeded_time=100.0 * float(np.mean(any_over)),
        thermal_exceeded_core_time=100.0 * float(np.mean(over_T > 0)),
        power_exceeded_avg=p_avg,
        power_exceeded_time=float(p_time),
        target_l2=l2,
        target_l2_rate=l2_rate,
        av_wlp=float(np.mean(wlp)),
        min_wlp=float(np.min(wlp)),
        avg_temp=float(np.mean(T)),
        max_temp=float(np.max(T)),
        total_energy=float(np.sum(P_tot) * record.dt),
        fv_violations=int(np.count_nonzero(fv_scan(record.F_applied, record.V_core, grid))),
        domain_incoherence=int(np.count_nonzero(incoherence_scan(record.V_core, record.membership))),
        command_violations=int(record.violations),
        deferred_steps=int(record.deferred),
        clamp_events=int(record.clamp_events),
        aborted=int(record.aborted),
    )


def aggregate(rows, group_by=("algorithm",), metric_names=None) -> dict:
    """Group-wise mean, SD, SE, max and quantiles.

    ``rows`` is a list of dicts holding label keys and metric values. Returns
    ``{group tuple: {metric: {stat: value}}}`` with group tuples in the order
    of ``group_by``.
    """
    if not rows:
        raise ValueError("nothing to aggregate")
    metric_names = metric_names or Metrics.names()
    groups = {}
    for r in rows:
        groups.setdefault(tuple(r[g] for g in group_by), []).append(r)
    out = {}
    for key in sorted(groups, key=str):
        items = groups[key]
        stats = {}
        for m in metric_names:
            v = np.array([float(r[m]) for r in items])
            sd = float(np.std(v, ddof=1)) if len(v) > 1 else 0.0
            q = np.quantile(v, [0.0, 0.25, 0.5, 0.75, 1.0])
            stats[m] = {"mean": float(np.mean(v)), "sd": sd, "se": sd / np.sqrt(len(v)),
                        "max": float(np.max(v)), "min": float(np.min(v)), "n": len(v),
                        "q25": float(q[1]), "median": float(q[2]), "q75": float(q[3])}
        out[key] = stats
    return out
