"""One 9-core test case under each controller, then the same case without control."""

# %%
import numpy as np

from hpcdtm.harness import ScenarioSpec, build_scenario, run_test

for alg in ("VBA", "EBA", "FCA"):
    case = build_scenario(ScenarioSpec("CLOUD-WL", "AIR", "4D", duration=0.5, seed=3, algorithm=alg))
    rec, m = run_test(case)
    print(f"{alg}: peak {m.max_temp:5.1f} degC  over T_L {m.thermal_exceeded_time:5.2f}% of time  "
          f"power over budget {m.power_exceeded_time:5.2f}%  work {m.av_wlp:5.1f}% (min {m.min_wlp:5.1f}%)")

# %% budget steps and the chip power that followed them
print("budget levels [W]", np.round(case.budget_values, 1))
P_tot = rec.P_core.sum(axis=1)
for lo, hi in zip(case.budget_times, list(case.budget_times[1:]) + [case.spec.duration]):
    sel = (rec.time > lo) & (rec.time <= hi)
    print(f"  {lo:.2f}-{hi:.2f} s  budget {rec.budget[sel][0]:6.1f} W  mean chip power {P_tot[sel].mean():6.1f} W")

# %% without control, maximum frequency and voltage from 90 degC runs away
case = build_scenario(ScenarioSpec("MAX-WL", "RACK", "1D", duration=0.5))
rec, m = run_test(case, uncontrolled=(3.45, 1.2), initial_state=np.full(22, 90.0))
print(f"uncontrolled: aborted={rec.aborted} after {rec.steps_done * rec.dt * 1e3:.1f} ms, "
      f"last peak {rec.T_true[-1].max():.0f} degC")
