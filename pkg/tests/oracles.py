"""Independent reference implementations used only by the tests."""

from __future__ import annotations

import numpy as np

# smoothing sharpness of the soft max; the schedule passes 50 and keeps going so the
# smoothing bias (up to log(n)/alpha in the max) drops below the actuator precision
ALPHA_SCHEDULE = (1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1000.0, 2000.0)


def soft_max(F, alpha):
    """Log-sum-exp smooth maximum and its gradient (softmax weights)."""
    m = F.max()
    e = np.exp(alpha * (F - m))
    s = e.sum()
    return m + np.log(s) / alpha, e / s


def newton_conv2f(P, T, c, quad_bound, params, schedule=ALPHA_SCHEDULE, F0=1.5, tol=1e-12,
                  max_iter=100):
    """Solve ``P_i = h(F_i, v(S_alpha(F)), T_i, c_i)`` for all cores with Newton-Raphson.

    ``v`` is the quadratic voltage bound flattened left of its vertex. Each
    stage of ``schedule`` starts from the previous stage's solution.
    """
    k2, k1, k0 = quad_bound
    vx = -k1 / (2 * k2) if k2 > 0 else -np.inf
    P, T, c = (np.asarray(a, dtype=float) for a in (P, T, c))
    F = np.full(len(P), F0)
    p = params
    for alpha in schedule:
        for _ in range(max_iter):
            M, w = soft_max(F, alpha)
            Mc = max(M, vx)
            V = k2 * Mc * Mc + k1 * Mc + k0
            dV = 0.0 if M < vx else 2 * k2 * M + k1
            leak = p.I_cc * np.exp(p.k_v * V + p.k_T * T + p.k_T0)
            r = p.k_s0 + leak * V + c * F * V * V - P
            d_dV = leak * (1 + p.k_v * V) + 2 * c * F * V
            J = np.outer(d_dV, dV * w) + np.diag(c * V * V)
            step = np.linalg.solve(J, r)
            F = np.clip(F - step, 0.05, 6.0)
            if np.abs(step).max() < tol:
                break
    return F


def scalar_pi(kp, ki, lo, hi, errors, Ts, out0):
    """Velocity-form PI, one scalar at a time."""
    out, prev, trace = out0, 0.0, []
    for e in errors:
        out = out + kp * (e - prev) + ki * Ts * e
        out = min(max(out, lo), hi)
        prev = e
        trace.append(out)
    return trace


def recompute_metrics(T, P_core, budget, possible, T_L, F_T, F_cmd, cycles, dt):
    """Loop-based recomputation of the exceedance, tracking and progress figures."""
    n_steps, n_c = T.shape
    worst, any_count = 0.0, 0
    for k in range(n_steps):
        hot = False
        for i in range(n_c):
            worst = max(worst, T[k, i] - T_L)
            hot = hot or T[k, i] > T_L
        any_count += hot
    rel, n_exc, n_pos = [], 0, 0
    for k in range(n_steps):
        tot = sum(P_core[k])
        if budget[k] < possible:
            n_pos += 1
            if tot > budget[k]:
                n_exc += 1
                rel.append((tot - budget[k]) / budget[k])
    norms = []
    for row in F_cmd:
        if np.isnan(row).any():
            continue
        norms.append(np.sqrt(sum((F_T[i] - row[i]) ** 2 for i in range(n_c))))
    wlp = [min(100.0, 100.0 * cycles[i] / (F_T[i] * 1e9 * dt * n_steps)) for i in range(n_c)]
    return {
        "thermal_exceeded_max": max(worst, 0.0),
        "thermal_exceeded_time": 100.0 * any_count / n_steps,
        "power_exceeded_avg": 100.0 * sum(rel) / len(rel) if rel else 0.0,
        "power_exceeded_time": 100.0 * n_exc / n_pos if n_pos else 0.0,
        "target_l2": sum(norms) / len(norms) / np.sqrt(n_c) if norms else 0.0,
        "av_wlp": sum(wlp) / n_c,
        "min_wlp": min(wlp),
    }
