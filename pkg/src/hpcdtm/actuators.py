"""Discrete frequency/voltage actuation, shared voltage domains and VRM delays."""

from __future__ import annotations

from dataclasses import dataclass, field

import math

import numpy as np
from numba import njit
from scipy.optimize import linprog

_EPS = 1e-9
_MODES = {"down": 0, "up": 1, "nearest": 2}


@njit(cache=True)
def _snap(f, levels, f_min, step, mode):
    out = np.empty(f.shape[0])
    top = levels.shape[0] - 1
    for i in range(f.shape[0]):
        pos = (f[i] - f_min) / step
        if mode == 0:
            k = math.floor(pos + 1e-9)
        elif mode == 1:
            k = math.ceil(pos - 1e-9)
        else:
            k = math.floor(pos + 0.5 + 1e-9)
        out[i] = levels[min(max(k, 0), top)]
    return out


class ActuatorRangeError(ValueError):
    """Frequency or voltage outside the operating grid."""


class DomainConfigError(ValueError):
    """Voltage-domain map does not partition the cores."""


# Default fmax ladder, one entry per voltage level 0.50 .. 1.20 V. The
# ladder corners follow a quadratic in F, which keeps the smooth f_V bound
# within one voltage step of the staircase. Increments never grow with
# voltage (sub-linear F-V relation).
DEFAULT_FMAX = (
    1.30, 1.65, 1.95, 2.15, 2.30, 2.45, 2.60,  # 0.50 .. 0.80 V
    2.75, 2.90, 3.00,                          # 0.85, 0.90, 0.95 V
    3.10, 3.20, 3.30, 3.40, 3.45,              # 1.00 .. 1.20 V
)


@dataclass
class OperatingGrid:
    """Frequency (GHz) and voltage (V) levels plus the F-V feasibility table."""

    freq_levels: np.ndarray
    volt_levels: np.ndarray
    fmax_per_volt: np.ndarray
    quad_bound: tuple = field(default=None)  # (k2, k1, k0), see fit_quadratic_fv_bound

    def __post_init__(self):
        self.freq_levels = np.asarray(self.freq_levels, dtype=float)
        self.volt_levels = np.asarray(self.volt_levels, dtype=float)
        self.fmax_per_volt = np.asarray(self.fmax_per_volt, dtype=float)
        if len(self.volt_levels) != len(self.fmax_per_volt):
            raise ValueError("one fmax entry is required per voltage level")
        if np.any(np.diff(self.freq_levels) <= 0) or np.any(np.diff(self.volt_levels) <= 0):
            raise ValueError("grid levels must be strictly ascending")
        if np.any(np.diff(self.fmax_per_volt) <= 0):
            raise ValueError("fmax_per_volt must be strictly increasing in V")
        for lv in (self.freq_levels, self.volt_levels):
            if len(lv) > 2 and np.ptp(np.diff(lv)) > 1e-6:
                raise ValueError("grid levels must be evenly spaced")
        self._f_min, self._f_max = float(self.freq_levels[0]), float(self.freq_levels[-1])
        self._v_min, self._v_max = float(self.volt_levels[0]), float(self.volt_levels[-1])
        self._f_step = float(self.freq_levels[1] - self.freq_levels[0]) if len(self.freq_levels) > 1 else 1.0
        self._v_step = float(self.volt_levels[1] - self.volt_levels[0]) if len(self.volt_levels) > 1 else 1.0
        if self.fmax_per_volt[0] < self.f_min - _EPS:
            raise ValueError("minimum frequency must be feasible at the lowest voltage")
        if self.quad_bound is None:
            self.quad_bound = fit_quadratic_fv_bound(self)
        self.quad_bound = tuple(float(c) for c in self.quad_bound)

    @classmethod
    def default(cls) -> "OperatingGrid":
        return cls.from_ranges()

    @classmethod
    def from_ranges(cls, f_min=0.4, f_max=3.45, f_step=0.05, v_min=0.5, v_max=1.2,
                    v_step=0.05, fmax_per_volt=DEFAULT_FMAX) -> "OperatingGrid":
        nf = int(round((f_max - f_min) / f_step)) + 1
        nv = int(round((v_max - v_min) / v_step)) + 1
        freqs = np.round(f_min + f_step * np.arange(nf), 6)
        volts = np.round(v_min + v_step * np.arange(nv), 6)
        return cls(freqs, volts, np.asarray(fmax_per_volt, dtype=float))

    @property
    def f_min(self) -> float:
        return self._f_min

    @property
    def f_max(self) -> float:
        return self._f_max

    @property
    def v_min(self) -> float:
        return self._v_min

    @property
    def v_max(self) -> float:
        return self._v_max

    @property
    def f_step(self) -> float:
        return self._f_step

    @property
    def v_step(self) -> float:
        return self._v_step

    def quantize_freq(self, f, mode="down"):
        """Snap frequencies onto the grid (``down``, ``up`` or ``nearest``), clipped to range."""
        if mode not in _MODES:
            raise ValueError(f"unknown quantization mode {mode!r}")
        f = np.asarray(f, dtype=float)
        flat = _snap(np.ascontiguousarray(f.ravel()), self.freq_levels, self._f_min, self._f_step,
                     _MODES[mode])
        if f.ndim == 0:
            return flat[0]
        return flat.reshape(f.shape) if f.ndim != 1 else flat

    def volt_index(self, v):
        """Index of grid voltage ``v``; raises on off-grid values."""
        idx = self.nearest_volt_index(v)
        if (np.abs(self.volt_levels[idx] - v) > 1e-6).any():
            raise ActuatorRangeError(f"voltage {v} is not a grid level")
        return idx

    def nearest_volt_index(self, v):
        """Index of the grid level closest to ``v`` (no validation)."""
        idx = np.rint((np.asarray(v, dtype=float) - self.v_min) / self.v_step)
        return np.minimum(np.maximum(idx, 0), len(self.volt_levels) - 1).astype(np.intp)

    def fv_index(self, f):
        """Index of f_V(f) for in-range frequencies (no validation)."""
        return np.searchsorted(self.fmax_per_volt, np.asarray(f) - _EPS)

    def quad_voltage(self, f):
        """Continuous upper bound of f_V used by the controllers.

        The quadratic is flattened left of its vertex so the bound stays
        non-decreasing in F (it still dominates f_V there).
        """
        k2, k1, k0 = self.quad_bound
        f = np.asarray(f, dtype=float)
        if k2 > 0:
            f = np.maximum(f, -k1 / (2.0 * k2))
        return k2 * f * f + k1 * f + k0


def min_voltage_for(f, grid: OperatingGrid):
    """Smallest grid voltage whose fmax sustains frequency ``f`` (the f_V map)."""
    f_arr = np.asarray(f, dtype=float)
    if np.any(f_arr > grid.fmax_per_volt[-1] + _EPS):
        raise ActuatorRangeError(f"frequency {f} above the global maximum")
    if np.any(f_arr < grid.f_min - _EPS):
        raise ActuatorRangeError(f"frequency {f} below the system minimum")
    idx = np.searchsorted(grid.fmax_per_volt, f_arr - _EPS)
    out = grid.volt_levels[idx]
    return float(out) if out.ndim == 0 else out


def max_frequency_at(v, grid: OperatingGrid):
    """fmax table lookup for a grid voltage. Temperature derating is not modelled."""
    out = grid.fmax_per_volt[grid.volt_index(v)]
    return float(out) if np.ndim(out) == 0 else out


def fit_quadratic_fv_bound(grid: OperatingGrid) -> tuple:
    """Minimal-slack quadratic ``k2 F^2 + k1 F + k0`` dominating f_V on grid frequencies.

    Solved as a linear program: minimise the worst-case slack subject to the
    polynomial lying on or above every (F, f_V(F)) grid point. With a single
    voltage level the bound collapses to the constant ``k0``.
    """
    f = grid.freq_levels[grid.freq_levels <= grid.fmax_per_volt[-1] + _EPS]
    fv = np.asarray(min_voltage_for(f, grid), dtype=float)
    if len(grid.volt_levels) == 1:
        return (0.0, 0.0, float(grid.volt_levels[0]))
    # variables: k2, k1, k0, s  (s = max slack)
    basis = np.column_stack([f * f, f, np.ones_like(f)])
    # -basis.k <= -fv   (domination)
    # basis.k - s <= fv (slack bound)
    a_ub = np.vstack([
        np.column_stack([-basis, np.zeros(len(f))]),
        np.column_stack([basis, -np.ones(len(f))]),
    ])
    b_ub = np.concatenate([-fv, fv])
    # small tie-breaker on total slack keeps the solution unique
    cost = np.array([basis[:, 0].sum(), basis[:, 1].sum(), basis[:, 2].sum(), 0.0]) * 1e-6
    cost[3] = 1.0
    res = linprog(cost, A_ub=a_ub, b_ub=b_ub,
                  bounds=[(0, None), (None, None), (None, None), (0, None)], method="highs")
    if not res.success:
        raise RuntimeError(f"quadratic F-V bound fit failed: {res.message}")
    k2, k1, k0, _ = res.x
    # guard against LP round-off so domination holds exactly
    k0 += max(0.0, float(np.max(fv - basis @ np.array([k2, k1, k0])))) + 1e-12
    return (float(k2), float(k1), float(k0))


@dataclass
class DomainMap:
    """Partition of cores into voltage domains."""

    membership: np.ndarray  # core -> domain index

    def __post_init__(self):
        self.membership = np.asarray(self.membership, dtype=int)
        if self.membership.ndim != 1 or len(self.membership) == 0:
            raise DomainConfigError("membership must be a non-empty 1-D array")
        if self.membership.min() < 0:
            raise DomainConfigError("unmapped core (negative domain index)")
        used = np.unique(self.membership)
        if not np.array_equal(used, np.arange(len(used))):
            raise DomainConfigError("domain indices must be contiguous from 0")
        self.cores = [np.flatnonzero(self.membership == d) for d in range(len(used))]
        self._sizes = np.array([len(c) for c in self.cores])
        self._order = np.concatenate(self.cores)
        self._starts = np.concatenate(([0], np.cumsum(self._sizes)[:-1]))

    @property
    def n_d(self) -> int:
        return len(self.cores)

    @property
    def n_c(self) -> int:
        return len(self.membership)

    @property
    def sizes(self) -> np.ndarray:
        return self._sizes

    @classmethod
    def single(cls, n_c: int) -> "DomainMap":
        return cls(np.zeros(n_c, dtype=int))

    @classmethod
    def per_core(cls, n_c: int) -> "DomainMap":
        return cls(np.arange(n_c))

    @classmethod
    def blocks(cls, rows: int, cols: int, n_d: int) -> "DomainMap":
        """Split a rows x cols grid into ``n_d`` contiguous domains.

        Square block tilings are used when they exist (4 domains on 6x6 gives
        3x3 blocks). Otherwise cores are taken in serpentine row order and cut
        into runs whose sizes differ by at most one, e.g. 4 domains on 3x3
        gives sizes 3, 2, 2, 2.
        """
        n_c = rows * cols
        if not 1 <= n_d <= n_c:
            raise DomainConfigError(f"cannot form {n_d} domains from {n_c} cores")
        if n_d == 1:
            return cls.single(n_c)
        if n_d == n_c:
            return cls.per_core(n_c)
        k = int(round(np.sqrt(n_d)))
        r, c = np.divmod(np.arange(n_c), cols)
        if k * k == n_d and rows % k == 0 and cols % k == 0:
            br, bc = rows // k, cols // k
            return cls((r // br) * k + (c // bc))
        snake = [rr * cols + (cc if rr % 2 == 0 else cols - 1 - cc)
                 for rr in range(rows) for cc in range(cols)]
        membership = np.empty(n_c, dtype=int)
        for d, chunk in enumerate(np.array_split(np.array(snake), n_d)):
            membership[chunk] = d
        return cls(membership)

    def domain_max(self, values: np.ndarray) -> np.ndarray:
        return np.maximum.reduceat(np.asarray(values, dtype=float)[self._order], self._starts)

    def domain_sum(self, values: np.ndarray) -> np.ndarray:
        return np.bincount(self.membership, weights=values, minlength=self.n_d)


@dataclass
class ActuationReport:
    violations: int = 0  # commands that had to be clamped
    deferred: int = 0    # frequency raises held back by a pending voltage rise


class ActuatorState:
    """Applied per-core frequencies and per-domain voltages with VRM transition delay.

    Frequencies change at the next plant step (a spare PLL holds the old clock
    while the other relocks). A voltage rise completes after ``vrm_delay``;
    until then cores stay capped at the old voltage's fmax. A voltage drop
    lowers the frequencies first, so the applied pair stays feasible.
    """

    def __init__(self, grid: OperatingGrid, domains: DomainMap, vrm_delay=50e-6,
                 f_init=None, v_init=None):
        self.grid = grid
        self.domains = domains
        self.vrm_delay = vrm_delay
        n_c, n_d = domains.n_c, domains.n_d
        if v_init is None:
            v_init = np.full(n_d, grid.v_min)
        self.applied_V = np.array(v_init, dtype=float) * np.ones(n_d)
        if f_init is None:
            f_init = np.full(n_c, grid.f_min)
        f0 = np.asarray(f_init, dtype=float) * np.ones(n_c)
        self.cmd_F = np.minimum(f0, max_frequency_at(self.applied_V, grid)[domains.membership])
        self.cmd_V = self.applied_V.copy()
        self.pending_until = np.full(n_d, -np.inf)
        self.pending_V = self.applied_V.copy()
        self.report = ActuationReport()
        self._pending = False
        self._cap = None

    def apply_commands(self, F, V, now: float):
        """Accept a command at time ``now``; returns the (F per core, V per domain) in force.

        Infeasible pieces of the command are clamped and counted in ``report``
        rather than raising, so a faulty controller shows up in the metrics.
        """
        grid, mem = self.grid, self.domains.membership
        F = np.asarray(F, dtype=float)
        V = np.asarray(V, dtype=float)
        idx = grid.nearest_volt_index(V)
        Vq = grid.volt_levels[idx]
        bad = int(np.count_nonzero(np.abs(Vq - V) > 1e-6))
        Fq = grid.quantize_freq(F, "down")
        bad += int(np.count_nonzero(np.abs(Fq - F) > 1e-6))
        cap = grid.fmax_per_volt[idx][mem]
        over = Fq > cap + _EPS
        if over.any():
            bad += int(np.count_nonzero(over))
            Fq = np.where(over, grid.quantize_freq(cap, "down"), Fq)
        self.report.violations += bad

        rising = Vq > self.applied_V + _EPS
        if rising.any():
            for d in np.flatnonzero(rising):
                if not (self.pending_until[d] > now and abs(self.pending_V[d] - Vq[d]) < _EPS):
                    self.pending_until[d] = now + self.vrm_delay
                    self.pending_V[d] = Vq[d]
            falling = ~rising
            # lower or equal voltage: no wait, and frequency already fits the new level
            self.applied_V[falling] = Vq[falling]
            self.pending_until[falling] = -np.inf
            self.pending_V[falling] = Vq[falling]
        else:
            self.applied_V[:] = Vq
            self.pending_until[:] = -np.inf
            self.pending_V[:] = Vq
        self._pending = bool(rising.any())
        self.cmd_F = Fq
        self.cmd_V = Vq
        self._cap = None
        return self.effective(now)

    def effective(self, now: float):
        """Frequencies/voltages the plant sees at ``now``, completing due transitions."""
        if self._pending:
            done = self.pending_until <= now + 1e-12
            if done.any():
                self.applied_V[done] = self.pending_V[done]
                self.pending_until[done] = -np.inf
                self._pending = bool(np.isfinite(self.pending_until).any())
                self._cap = None
        if self._cap is None:
            self._cap = self.grid.fmax_per_volt[self.grid.nearest_volt_index(self.applied_V)][
                self.domains.membership]
        F = np.minimum(self.cmd_F, self._cap)
        waiting = F < self.cmd_F - _EPS
        if waiting.any():
            self.report.deferred += int(np.count_nonzero(waiting))
            F = self.grid.quantize_freq(F, "down")
        return F, self.applied_V.copy()

    @property
    def has_pending(self) -> bool:
        return self._pending


def is_feasible(F, V_domain, grid: OperatingGrid, domains: DomainMap) -> bool:
    """Check the F-V constraint and grid membership for a full chip operating point."""
    F = np.asarray(F, dtype=float)
    V_domain = np.asarray(V_domain, dtype=float)
    try:
        cap = grid.fmax_per_volt[grid.volt_index(V_domain)][domains.membership]
    except ActuatorRangeError:
        return False
    on_grid = np.all(np.abs(grid.quantize_freq(F, "nearest") - F) < 1e-6)
    return bool(on_grid and np.all(F >= grid.f_min - _EPS) and np.all(F <= cap + _EPS))
