"""A reduced battery with grouped summaries and plot-ready exports.

``hpcdtm battery --quick --out DIR`` runs the complete 9-core grid.
"""

# %%
import sys
import tempfile

from hpcdtm.harness import BatterySpec, ScenarioSpec, aggregate, export_battery, run_battery

battery = BatterySpec(workloads=("MAX-WL", "CLOUD-WL"), coolings=("WATER", "RACK"), domains=("1D", "AD"),
                      seeds=(0, 1), base=ScenarioSpec(duration=0.5))
print(f"{len(battery)} runs", file=sys.stderr)
result = run_battery(battery)

# %%
cols = ("thermal_exceeded_max", "thermal_exceeded_time", "power_exceeded_avg", "av_wlp", "min_wlp")
print("alg   " + " ".join(f"{c:>22s}" for c in cols))
for (alg,), stats in aggregate(result.rows).items():
    print(f"{alg:5s} " + " ".join(f"{stats[c]['mean']:10.3f} +- {stats[c]['sd']:8.3f}" for c in cols))

# %%
for (alg, cool), stats in aggregate(result.rows, ("algorithm", "cooling")).items():
    print(f"{alg} {cool:5s} mean peak {stats['max_temp']['mean']:.1f} degC")

out = tempfile.mkdtemp(prefix="hpcdtm_")
paths = export_battery(result, out)
print("wrote", *paths.values())
