"""Power -> (F, V) conversion for shared-voltage domains.

Every core i of a domain must satisfy ``P_a,i = h_est(F_i, f_V(max_j F_j), T_i, C_i)``.
With the fastest frequency M fixed, the voltage is fixed and each F_i has a
closed form; the remaining scalar unknown M solves ``max_i F_i(M) = M``.
``max_i F_i(M) - M`` is strictly decreasing, so bisection on M always
converges once each P_a,i lies in the feasible band (clamped beforehand).
f_V is replaced by the smooth quadratic upper bound of the grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from ..actuators import DomainMap, OperatingGrid
from .base import PowerEstimator
from .distribution import csr

TOL = 5e-3  # GHz, finer than any realistic actuator step


@dataclass
class Conv2FResult:
    F: np.ndarray          # continuous solution, GHz per core
    F_q: np.ndarray        # quantized down to the grid
    V: np.ndarray          # f_V(max F_q) per domain, grid level
    M: np.ndarray          # continuous max frequency per domain
    clamped: int           # cores whose P_a was pulled into the feasible band
    iterations: int        # most bisection steps used by any domain


def power_band(est: PowerEstimator, grid: OperatingGrid, T, ceff):
    """Lowest and highest per-core power reachable with the domain at F_min resp. F_max."""
    v_lo = grid.quad_voltage(grid.f_min)
    v_hi = grid.quad_voltage(grid.f_max)
    return est.power(grid.f_min, v_lo, T, ceff), est.power(grid.f_max, v_hi, T, ceff)


@njit(cache=True)
def _quad_v(M, k2, k1, k0):
    if k2 > 0.0:
        vx = -k1 / (2.0 * k2)
        if M < vx:
            M = vx
    return (k2 * M + k1) * M + k0


@njit(cache=True)
def _freq(P, V, T, c, k_s0, i_cc, k_v, k_T, k_T0):
    static = k_s0 + i_cc * V * math.exp(k_v * V + k_T * T + k_T0)
    return (P - static) / (c * V * V)


@njit(cache=True)
def _bisect_domains(P, T, c, order, offsets, k2, k1, k0, f_min, f_max,
                    k_s0, i_cc, k_v, k_T, k_T0, tol, max_iter, F_out, M_out):
    n_d = offsets.shape[0] - 1
    worst = 0
    for d in range(n_d):
        a, b = offsets[d], offsets[d + 1]
        lo, hi = f_min, f_max
        v = _quad_v(lo, k2, k1, k0)
        g_lo = -1e300
        for j in range(a, b):
            i = order[j]
            g_lo = max(g_lo, _freq(P[i], v, T[i], c[i], k_s0, i_cc, k_v, k_T, k_T0))
        g_lo -= lo
        v = _quad_v(hi, k2, k1, k0)
        g_hi = -1e300
        for j in range(a, b):
            i = order[j]
            g_hi = max(g_hi, _freq(P[i], v, T[i], c[i], k_s0, i_cc, k_v, k_T, k_T0))
        g_hi -= hi
        it = 0
        if g_lo <= 0.0:
            M = lo
        elif g_hi >= 0.0:
            M = hi
        else:
            while it < max_iter:
                # stop when every core's frequency is pinned to within tol, not just M
                v_lo = _quad_v(lo, k2, k1, k0)
                v_hi = _quad_v(hi, k2, k1, k0)
                spread = 0.0
                for j in range(a, b):
                    i = order[j]
                    s = (_freq(P[i], v_lo, T[i], c[i], k_s0, i_cc, k_v, k_T, k_T0)
                         - _freq(P[i], v_hi, T[i], c[i], k_s0, i_cc, k_v, k_T, k_T0))
                    spread = max(spread, s)
                if hi - lo <= tol and spread <= tol:
                    break
                mid = 0.5 * (lo + hi)
                v = _quad_v(mid, k2, k1, k0)
                g = -1e300
                for j in range(a, b):
                    i = order[j]
                    g = max(g, _freq(P[i], v, T[i], c[i], k_s0, i_cc, k_v, k_T, k_T0))
                if g - mid > 0.0:
                    lo = mid
                else:
                    hi = mid
                it += 1
            M = 0.5 * (lo + hi)
        v = _quad_v(M, k2, k1, k0)
        for j in range(a, b):
            i = order[j]
            f = _freq(P[i], v, T[i], c[i], k_s0, i_cc, k_v, k_T, k_T0)
            F_out[i] = min(max(f, f_min), M)
        M_out[d] = M
        worst = max(worst, it)
    return worst


def conv2f_domains(P_a, T, ceff, domains: DomainMap, grid: OperatingGrid,
                   est: PowerEstimator | None = None, tol: float = TOL, max_iter: int = 60,
                   layout=None) -> Conv2FResult:
    """Solve every domain's system; quantize down and pick V = f_V(max F_q) per domain."""
    est = est or PowerEstimator()
    P_a = np.asarray(P_a, dtype=float)
    n = len(P_a)
    T = np.asarray(T, dtype=float)
    if T.shape != (n,):
        T = np.full(n, T) if T.ndim == 0 else np.ascontiguousarray(np.broadcast_to(T, (n,)))
    ceff = np.maximum(np.asarray(ceff, dtype=float), 1e-6)
    if ceff.shape != (n,):
        ceff = np.ascontiguousarray(np.broadcast_to(ceff, (n,)))
    lo_p, hi_p = power_band(est, grid, T, ceff)
    P_c = np.minimum(np.maximum(P_a, lo_p), hi_p)
    clamped = int(np.count_nonzero(np.abs(P_c - P_a) > 1e-9 * np.maximum(1.0, np.abs(P_a))))
    order, offsets = layout if layout is not None else csr(domains)
    p = est.params
    F = np.empty(n)
    M = np.empty(domains.n_d)
    k2, k1, k0 = grid.quad_bound
    iters = _bisect_domains(P_c, T, ceff, order, offsets, k2, k1, k0, grid.f_min, grid.f_max,
                            p.k_s0, p.I_cc, p.k_v, p.k_T, p.k_T0, tol, max_iter, F, M)
    F_q = grid.quantize_freq(F + 1e-9, "down")
    fmax_dom = domains.domain_max(F_q)
    idx = np.searchsorted(grid.fmax_per_volt, fmax_dom - 1e-9)
    V = grid.volt_levels[idx]
    return Conv2FResult(F=F, F_q=F_q, V=V, M=M, clamped=clamped, iterations=int(iters))


def conv2f_bisection(P_a, T, ceff, grid: OperatingGrid, est: PowerEstimator | None = None,
                     tol: float = TOL, max_iter: int = 60) -> Conv2FResult:
    """Single-domain form: all given cores share one rail."""
    P_a = np.atleast_1d(np.asarray(P_a, dtype=float))
    return conv2f_domains(P_a, T, ceff, DomainMap.single(len(P_a)), grid, est, tol, max_iter)
