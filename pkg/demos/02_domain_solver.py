"""Turn per-core power grants into frequencies for one shared-voltage domain.

The rail voltage depends on the fastest core, so every core's frequency is
coupled to the others. The bisection solver is checked here against a brute
force scan over the maximum frequency.
"""

# %%
import numpy as np

from hpcdtm.actuators import OperatingGrid
from hpcdtm.controllers import PowerEstimator, conv2f_bisection
from hpcdtm.workload import DEFAULT_CEFF, WorkloadClass

grid = OperatingGrid.default()
est = PowerEstimator()
T = np.array([62.0, 70.0, 55.0, 81.0])  # degC
c = np.array([DEFAULT_CEFF[WorkloadClass.VECTOR], DEFAULT_CEFF[WorkloadClass.INTFLOAT],
              DEFAULT_CEFF[WorkloadClass.IDLE], DEFAULT_CEFF[WorkloadClass.VECTOR]])
P = np.array([4.0, 2.5, 0.9, 4.5])       # W granted to each core

out = conv2f_bisection(P, T, c, grid, est)
print("continuous F [GHz]", np.round(out.F, 4))
print("grid F [GHz]      ", out.F_q, " rail V", out.V)

# %% brute force: for each candidate max frequency M, solve each core in closed form at V(M)
M = np.linspace(grid.f_min, grid.f_max, 200001)
V = grid.quad_voltage(M)
F = (P[:, None] - est.static(V[None, :], T[:, None])) / (c[:, None] * V[None, :] ** 2)
gap = np.abs(F.max(axis=0) - M)
best = np.argmin(gap)
print("scan max F", round(M[best], 4), " bisection max F", round(out.F.max(), 4))
