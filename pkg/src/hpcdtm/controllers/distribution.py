"""Budget sharing between cores and domains."""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from ..actuators import DomainMap


@njit(cache=True)
def _fill_one(request, floor, weight, budget, idx, out):
    # grants min(request, floor + c * weight) summing to budget over items idx
    tot_req = 0.0
    tot_floor = 0.0
    for i in idx:
        tot_req += request[i]
        tot_floor += min(floor[i], request[i])
    if tot_req <= budget:
        for i in idx:
            out[i] = request[i]
        return False
    if tot_floor >= budget:
        for i in idx:
            out[i] = min(floor[i], request[i])
        return tot_floor > budget + 1e-9
    n = idx.shape[0]
    brk = np.empty(n)
    w_active = 0.0
    for k in range(n):
        i = idx[k]
        w = max(weight[i], 1e-12)
        brk[k] = (request[i] - min(floor[i], request[i])) / w
        w_active += w
    order = np.argsort(brk)
    remaining = budget - tot_floor
    prev = 0.0
    c = 0.0
    for k in order:
        span = (brk[k] - prev) * w_active
        if span >= remaining:
            c = prev + remaining / w_active
            break
        remaining -= span
        prev = brk[k]
        w_active -= max(weight[idx[k]], 1e-12)
        c = prev
    for i in idx:
        f = min(floor[i], request[i])
        out[i] = min(request[i], f + c * max(weight[i], 1e-12))
    return False


@njit(cache=True)
def _fill_groups(request, floor, weight, budgets, order, offsets, out):
    short = False
    for d in range(offsets.shape[0] - 1):
        if _fill_one(request, floor, weight, budgets[d], order[offsets[d]:offsets[d + 1]], out):
            short = True
    return short


def water_fill_groups(request, floor, weight, budgets, order, offsets):
    """Water-fill each group ``order[offsets[d]:offsets[d+1]]`` against ``budgets[d]``.

    Returns (grants, short) where ``short`` is True if some group's floors
    alone exceeded its budget (the floors are granted anyway).
    """
    out = np.empty(len(request))
    short = _fill_groups(np.asarray(request, dtype=float), np.asarray(floor, dtype=float),
                         np.asarray(weight, dtype=float), np.asarray(budgets, dtype=float),
                         order, offsets, out)
    return out, bool(short)


def thermal_weight(T, T_L, scale=10.0):
    """Share weight that decays with temperature: e-fold per ``scale`` degC above T_L."""
    return np.exp(-(np.asarray(T, dtype=float) - T_L) / scale)


_ONE_GROUP = {}


def _one_group(n: int):
    """CSR layout putting ``n`` items in a single group."""
    if n not in _ONE_GROUP:
        _ONE_GROUP[n] = (np.arange(n, dtype=np.int64), np.array([0, n], dtype=np.int64))
    return _ONE_GROUP[n]


def csr(domains: DomainMap):
    order = np.concatenate(domains.cores).astype(np.int64)
    offsets = np.concatenate(([0], np.cumsum(domains.sizes))).astype(np.int64)
    return order, offsets


@njit(cache=True)
def _domain_power(x, cap, T, c, off, idx, k2, k1, k0, k_s0, i_cc, k_v, k_T, k_T0, out):
    # every core at min(x, its cap), rail at the quadratic bound of the fastest
    top = -1e300
    for i in idx:
        top = max(top, min(x, cap[i]))
    if k2 > 0.0:
        top = max(top, -k1 / (2.0 * k2))
    v = (k2 * top + k1) * top + k0
    tot = 0.0
    for i in idx:
        p = (k_s0 + i_cc * v * math.exp(k_v * v + k_T * T[i] + k_T0)
             + c[i] * min(x, cap[i]) * v * v + off[i])
        out[i] = p
        tot += p
    return tot


@njit(cache=True)
def _equal_freq_split(grant_d, cap, T, c, off, order, offsets, k2, k1, k0, f_min,
                      k_s0, i_cc, k_v, k_T, k_T0, out):
    short = False
    for d in range(offsets.shape[0] - 1):
        idx = order[offsets[d]:offsets[d + 1]]
        hi = f_min
        for i in idx:
            hi = max(hi, cap[i])
        if _domain_power(hi, cap, T, c, off, idx, k2, k1, k0, k_s0, i_cc, k_v, k_T, k_T0,
                         out) <= grant_d[d]:
            continue
        lo = f_min
        if _domain_power(lo, cap, T, c, off, idx, k2, k1, k0, k_s0, i_cc, k_v, k_T, k_T0,
                         out) >= grant_d[d]:
            short = short or (_domain_power(lo, cap, T, c, off, idx, k2, k1, k0, k_s0, i_cc,
                                            k_v, k_T, k_T0, out) > grant_d[d] + 1e-9)
            continue
        while hi - lo > 1e-6:
            mid = 0.5 * (lo + hi)
            if _domain_power(mid, cap, T, c, off, idx, k2, k1, k0, k_s0, i_cc, k_v, k_T, k_T0,
                             out) > grant_d[d]:
                hi = mid
            else:
                lo = mid
        _domain_power(lo, cap, T, c, off, idx, k2, k1, k0, k_s0, i_cc, k_v, k_T, k_T0, out)
    return short


def split_equal_frequency(grant_d, F_cap, sensed_T, workload_proxy, offset, domains: DomainMap,
                          grid, est, layout=None):
    """Split each domain's grant so its cores share one frequency ceiling.

    Cores below the ceiling keep their own cap. The rail sits at the
    quadratic voltage bound of the fastest core, so each core's share is its
    estimated power at that common point: heavier workloads receive more
    power for the same frequency. Returns (grants, short) where ``short``
    flags a domain whose grant is below its minimum-frequency power.
    """
    order, offsets = layout if layout is not None else csr(domains)
    n = domains.n_c
    p = est.params
    k2, k1, k0 = grid.quad_bound
    out = np.empty(n)
    short = _equal_freq_split(np.asarray(grant_d, dtype=float),
                              np.maximum(np.asarray(F_cap, dtype=float), grid.f_min),
                              np.asarray(sensed_T, dtype=float),
                              np.maximum(np.asarray(workload_proxy, dtype=float), 1e-6),
                              np.asarray(offset, dtype=float) * np.ones(n), order, offsets,
                              k2, k1, k0, grid.f_min, p.k_s0, p.I_cc, p.k_v, p.k_T, p.k_T0, out)
    return out, bool(short)


def fca_power_distribute(domain_budgets, P_est, floor, sensed_T, workload_proxy, domains: DomainMap,
                         P_B: float, T_L: float, beta=0.5, scale=10.0, layout=None, split=None):
    """Per-domain then per-core power grants.

    Domains are first limited to their own budgets. If the chip total is still
    above ``P_B``, the excess is taken mostly from domains whose temperature
    blend ``beta * max T + (1 - beta) * mean T`` is high. Each domain's grant
    is then split between its cores in proportion to their workload proxy
    (heavier cores first), never below the per-core floor.

    ``split``, if given, replaces the proportional within-domain step: it
    maps the domain grants to (per-core grants, short flag).

    Returns (grants per core, domain grants, short flag).
    """
    layout = layout if layout is not None else csr(domains)
    P_est = np.asarray(P_est, dtype=float)
    floor = np.minimum(np.asarray(floor, dtype=float), P_est)
    req_d = domains.domain_sum(P_est)
    floor_d = domains.domain_sum(floor)
    cap_d = np.minimum(req_d, np.asarray(domain_budgets, dtype=float))
    t_max = domains.domain_max(sensed_T)
    t_mean = domains.domain_sum(sensed_T) / domains.sizes
    blend = beta * t_max + (1.0 - beta) * t_mean
    one = _one_group(domains.n_d)
    w_d = np.maximum(cap_d - floor_d, 1e-9) * thermal_weight(blend, T_L, scale)
    grant_d, short_g = water_fill_groups(cap_d, floor_d, w_d, np.array([P_B]), *one)
    if split is not None:
        grants, short_d = split(grant_d)
        return grants, grant_d, short_g or short_d
    w_i = np.maximum(np.asarray(workload_proxy, dtype=float), 1e-6)
    grants, short_d = water_fill_groups(P_est, floor, w_i, grant_d, *layout)
    return grants, grant_d, short_g or short_d
