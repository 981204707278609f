"""Build the 3x3 chip thermal network, inspect its time scales and watch a step response."""

# %%
import numpy as np

from hpcdtm.thermal import CoolingVariant, Floorplan, build_thermal_network, discretize, thermal_step

fp = Floorplan(3, 3)
for kind in ("WATER", "AIR", "RACK"):
    net = build_thermal_network(fp, cooling=CoolingVariant.named(kind))
    tc = net.time_constants()
    print(f"{kind:5s} n_s={net.n_s}  fastest {tc[0] * 1e3:.2f} ms  slowest {tc[-1]:.1f} s")

# %% steady state with 5 W per core: AIR runs the centre hottest, RACK the back column
for kind in ("AIR", "RACK"):
    net = build_thermal_network(fp, cooling=CoolingVariant.named(kind))
    T_si = net.steady_state(np.full(9, 5.0))[0:18:2].reshape(3, 3)
    print(kind)
    print(np.array2string(T_si, precision=1))

# %% 50 us steps of a 5 W load on one corner core, starting from ambient
net = build_thermal_network(fp)
model = discretize(net, 50e-6)
P = np.zeros(9)
P[0] = 5.0
for k in range(1, 20001):
    thermal_step(model, P, 25.0)
    if k in (20, 200, 2000, 20000):
        print(f"t={k * 50e-6:6.3f} s  core0 {model.silicon[0]:6.2f}  core8 {model.silicon[8]:6.2f} degC")
