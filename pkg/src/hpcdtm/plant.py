"""Compiled inner loop stepping power, workload and thermal state together.

One call advances the plant over a block of fixed steps (one control period)
with the actuation already resolved per step. Leakage is evaluated on the
true silicon temperature at the start of each step.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

RUNAWAY_LIMIT = 400.0  # degC, state considered diverged above this


@njit(cache=True)
def _ceff_integral(edges, cum, lo, hi, x):
    # integral of C_eff over [0, x] for the trace stored in edges[lo:hi], cum[lo:hi]
    total = edges[hi - 1]
    laps = math.floor(x / total)
    r = x - laps * total
    a, b = lo, hi - 2  # last segment starts at hi-2
    while a < b:
        m = (a + b + 1) // 2
        if edges[m] <= r:
            a = m
        else:
            b = m - 1
    seg = a
    slope = (cum[seg + 1] - cum[seg]) / (edges[seg + 1] - edges[seg])
    return laps * cum[hi - 1] + cum[seg] + slope * (r - edges[seg])


@njit(cache=True)
def advance_block(state, Ad, Bd, bd_amb, T_amb, dt, F_seq, V_seq, pos, edges, cum, offsets,
                  k_s0, i_cc, k_v, k_T, k_T0, ceff_scale, out_T, out_P, out_ceff):
    """Advance ``F_seq.shape[0]`` steps in place.

    ``Bd`` is the discrete input matrix (n_s x n_c). ``V_seq`` holds
    the per-core supply voltage. ``i_cc`` and ``ceff_scale`` are per core.
    Returns the number of steps taken; fewer than requested means the state
    diverged (NaN or above RUNAWAY_LIMIT) on the last one.
    """
    n_steps, n_c = F_seq.shape
    n_s = state.shape[0]
    P = np.empty(n_c)
    new = np.empty(n_s)
    for s in range(n_steps):
        for i in range(n_c):
            f = F_seq[s, i]
            v = V_seq[s, i]
            theta = f * 1e9 * dt
            lo, hi = offsets[i], offsets[i + 1]
            c0 = _ceff_integral(edges, cum, lo, hi, pos[i])
            pos[i] += theta
            c1 = _ceff_integral(edges, cum, lo, hi, pos[i])
            avg = (c1 - c0) / theta
            t_si = state[2 * i]
            P[i] = (k_s0 + i_cc[i] * v * math.exp(k_v * v + k_T * t_si + k_T0)
                    + ceff_scale[i] * avg * f * v * v)
            out_P[s, i] = P[i]
            out_ceff[s, i] = avg
        ok = True
        for r in range(n_s):
            acc = bd_amb[r] * T_amb
            for c in range(n_s):
                acc += Ad[r, c] * state[c]
            for i in range(n_c):
                acc += Bd[r, i] * P[i]
            new[r] = acc
            if not (acc < RUNAWAY_LIMIT):
                ok = False
        for r in range(n_s):
            state[r] = new[r]
        for i in range(n_c):
            out_T[s, i] = state[2 * i]
        if not ok:
            return s + 1
    return n_steps
