import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import recompute_metrics

from hpcdtm.actuators import OperatingGrid
from hpcdtm.cli import main as cli_main
from hpcdtm.config import ConfigError, load_config
from hpcdtm.harness import (BatterySpec, ExportError, Metrics, PlantConfig, RunRecord, ScenarioError,
                            ScenarioSpec, aggregate, build_scenario, build_summary, compute_metrics,
                            export_battery, read_results_csv, read_run_csv, read_summary_json,
                            run_battery, run_test, write_results_csv, write_run_csv)
from hpcdtm.harness.export import run_csv_columns, summary_digest
from hpcdtm.power import CorePowerParams
from hpcdtm.workload import WorkloadClass

G = OperatingGrid.default()


def synthetic_record(T, budget=None, n_c=None, F_cmd=None, cycles=None, F_T=None, seed=0):
    n_steps, n_c = T.shape
    rng = np.random.default_rng(seed)
    K = max(1, n_steps // 10)
    F_T = np.full(n_c, 2.0) if F_T is None else F_T
    return RunRecord(
        dt=50e-6, Ts=500e-6, T_true=T, P_core=rng.uniform(1, 10, (n_steps, n_c)),
        ceff=np.ones((n_steps, n_c)), F_applied=np.full((n_steps, n_c), 1.0),
        V_core=np.full((n_steps, n_c), 0.8), V_domain=np.full((n_steps, 1), 0.8),
        budget=np.full(n_steps, 1e3) if budget is None else budget,
        T_sensed=T[::10][:K], P_rail=np.zeros((K, 1)),
        F_cmd=np.full((K, n_c), 2.0) if F_cmd is None else F_cmd, F_T=F_T,
        membership=np.zeros(n_c, dtype=int),
        cycles=F_T * 1e9 * 50e-6 * n_steps if cycles is None else cycles, steps_done=n_steps)


@pytest.fixture(scope="module")
def case9():
    return build_scenario(ScenarioSpec("MAX-WL", "WATER", "1D", duration=0.05))


# scenarios

def test_multi_wl_domains_mix_groups():
    for seed in range(10):
        case = build_scenario(ScenarioSpec("MULTI-WL", "WATER", "4D", n_c=36, seed=seed))
        for d in range(case.n_d):
            cls = {case.classes[i] for i in case.domain_map.cores[d]}
            assert WorkloadClass.VECTOR in cls and WorkloadClass.INTFLOAT in cls
        idle = sum(c is WorkloadClass.IDLE for c in case.classes)
        assert idle > case.n_c / 2
        assert set(np.round(case.F_T, 6)) <= {3.45, 2.7, 0.4}


@pytest.mark.parametrize("n_c", [9, 36])
def test_ad_has_one_core_per_domain(n_c):
    case = build_scenario(ScenarioSpec(domains="AD", n_c=n_c))
    assert case.n_d == case.n_c == n_c


def test_case_hash_deterministic():
    s = ScenarioSpec("CLOUD-WL", "AIR", "4D", seed=3)
    assert build_scenario(s).case_hash() == build_scenario(s).case_hash()
    assert build_scenario(s).case_hash() != build_scenario(ScenarioSpec("CLOUD-WL", "AIR", "4D", seed=4)).case_hash()


def test_budget_schedule(case9):
    ref = case9.reference_power
    got = [case9.budget_at(t) / ref for t in np.linspace(0, 0.0499, 5)]
    np.testing.assert_allclose(got, [1.0, 0.6, 0.8, 0.4, 0.9])
    assert case9.possible_power == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("kw", [dict(domains="9D", n_c=4), dict(n_c=8), dict(workload="BURST"),
                                dict(Ts=120e-6), dict(duration=0.0), dict(cooling="OIL")])
def test_scenario_errors(kw):
    with pytest.raises((ScenarioError, ValueError)):
        build_scenario(ScenarioSpec(**kw))


# runs

def test_zero_power_stays_at_ambient(case9):
    plant = PlantConfig(power=CorePowerParams(k_s0=0.0, I_cc=1e-300),
                        ceff_table={c: 0.0 for c in WorkloadClass})
    n_s = 2 * 9 + 4
    rec, m = run_test(case9, plant, uncontrolled=(2.0, 1.0), initial_state=np.full(n_s, 25.0))
    np.testing.assert_allclose(rec.T_true, 25.0, atol=1e-9)
    assert m.thermal_exceeded_max == 0 and m.thermal_exceeded_time == 0
    assert m.power_exceeded_avg == 0 and m.power_exceeded_time == 0
    assert m.fv_violations == 0 and m.domain_incoherence == 0 and not m.aborted


def test_runaway_witness():
    case = build_scenario(ScenarioSpec("MAX-WL", "RACK", "1D", duration=0.5))
    rec, m = run_test(case, uncontrolled=(G.f_max, G.v_max), initial_state=np.full(22, 90.0))
    assert rec.aborted and m.aborted == 1
    Tmax = rec.T_true.max(axis=1)
    assert len(Tmax) == rec.steps_done
    assert np.all(np.diff(Tmax) > 0)
    assert rec.steps_done * rec.dt >= 0.1


def test_timing_contract(case9):
    # commands decided at instant k show up in the applied frequency from instant k+1
    rec, _ = run_test(case9)
    per = int(round(rec.Ts / rec.dt))
    K = len(rec.F_cmd)
    for k in range(2, K - 1):
        np.testing.assert_allclose(rec.F_applied[(k + 1) * per + per - 1], rec.F_cmd[k], atol=1e-9)
        np.testing.assert_allclose(rec.F_applied[(k + 1) * per - 1], rec.F_cmd[k - 1], atol=1e-9)
    assert rec.violations == 0


def test_run_deterministic(case9):
    _, a = run_test(case9)
    _, b = run_test(case9)
    assert a.as_dict() == b.as_dict()


# metrics

def test_metrics_never_exceeds(case9):
    m = compute_metrics(synthetic_record(np.full((100, 9), 60.0)), case9, G)
    assert (m.thermal_exceeded_max, m.thermal_exceeded_time) == (0.0, 0.0)
    assert (m.power_exceeded_avg, m.power_exceeded_time) == (0.0, 0.0)


def test_metrics_one_hot_core(case9):
    T = np.full((1000, 9), 80.0)
    T[200:300, 4] = 88.0
    m = compute_metrics(synthetic_record(T), case9, G)
    assert m.thermal_exceeded_max == pytest.approx(3.0)
    assert m.thermal_exceeded_time == pytest.approx(10.0)


def test_metrics_power_only_counted_when_possible(case9):
    T = np.full((10, 9), 50.0)
    rec = synthetic_record(T, budget=np.full(10, case9.possible_power * 2))
    rec.P_core[:] = case9.possible_power  # far above the budget, but budget cannot bind
    m = compute_metrics(rec, case9, G)
    assert m.power_exceeded_time == 0.0 and m.power_exceeded_avg == 0.0


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31))
def test_metrics_match_recompute_oracle(seed):
    rng = np.random.default_rng(seed)
    case = build_scenario(ScenarioSpec("MULTI-WL", "WATER", "4D", seed=seed % 5, duration=0.01))
    n, n_c = 60, case.n_c
    T = rng.uniform(70, 95, (n, n_c))
    budget = rng.choice(case.budget_values, n) * rng.choice([1.0, 3.0], n)
    F_cmd = rng.uniform(0.4, 3.45, (6, n_c))
    F_cmd[rng.integers(6)] = np.nan
    cycles = case.F_T * 1e9 * 50e-6 * n * rng.uniform(0.3, 1.2, n_c)
    rec = synthetic_record(T, budget=budget, F_cmd=F_cmd, cycles=cycles, F_T=case.F_T, seed=seed)
    got = compute_metrics(rec, case, G).as_dict()
    ref = recompute_metrics(T, rec.P_core, budget, case.possible_power, case.spec.T_L, case.F_T,
                            F_cmd, cycles, rec.dt)
    for k, v in ref.items():
        assert got[k] == pytest.approx(v, rel=1e-9, abs=1e-12), k


@given(st.dictionaries(st.sampled_from(Metrics.names()), st.floats(0, 100), min_size=1))
def test_metrics_dict_round_trip(values):
    m = Metrics.from_dict(values)
    assert Metrics.from_dict(m.as_dict()) == m


# aggregation

def _row(alg, **metrics):
    return {"algorithm": alg, **Metrics.from_dict(metrics).as_dict()}


def test_aggregate_single_and_pair():
    one = aggregate([_row("FCA", av_wlp=80.0)])[("FCA",)]["av_wlp"]
    assert one["mean"] == 80.0 and one["sd"] == 0.0 and one["n"] == 1
    two = aggregate([_row("FCA", av_wlp=80.0), _row("FCA", av_wlp=90.0)])[("FCA",)]["av_wlp"]
    assert two["mean"] == 85.0 and two["max"] == 90.0
    assert two["sd"] == pytest.approx(np.sqrt(50.0))
    with pytest.raises(ValueError):
        aggregate([])


@given(st.lists(st.tuples(st.sampled_from("ABC"), st.floats(0, 100)), min_size=1, max_size=30))
def test_aggregate_partitions(items):
    rows = [_row(a, min_wlp=v) for a, v in items]
    stats = aggregate(rows)
    assert sum(s["min_wlp"]["n"] for s in stats.values()) == len(rows)
    for (a,), s in stats.items():
        vals = [v for b, v in items if b == a]
        assert s["min_wlp"]["mean"] == pytest.approx(np.mean(vals))
        assert s["min_wlp"]["min"] <= s["min_wlp"]["median"] <= s["min_wlp"]["max"]


# batteries and export

@pytest.fixture(scope="module")
def small_battery():
    b = BatterySpec(workloads=("MAX-WL", "MULTI-WL"), coolings=("WATER",), domains=("1D", "AD"),
                    algorithms=("VBA", "FCA"), seeds=(0, 1),
                    base=ScenarioSpec(duration=0.02))
    return run_battery(b)


def test_battery_covers_grid(small_battery):
    assert len(small_battery.rows) == 16
    assert len(small_battery.select(algorithm="FCA", domains="AD")) == 4
    assert all(r["aborted"] == 0 for r in small_battery.rows)


def test_export_round_trip(small_battery, tmp_path):
    paths = export_battery(small_battery, tmp_path)
    back = read_results_csv(paths["results"])
    for a, b in zip(small_battery.rows, back):
        assert Metrics.from_dict(a) == Metrics.from_dict(b)
        assert (a["algorithm"], a["seed"]) == (b["algorithm"], b["seed"])
    # group means recomputed from the raw CSV agree with the summary
    summary = read_summary_json(paths["summary"])
    for grp in summary["groups"].values():
        stats = aggregate(back, tuple(grp["group_by"]))
        assert summary_digest({"|".join(map(str, k)): v for k, v in stats.items()}) == grp["digest"]
    assert summary["n_runs"] == 16
    # long format: one line per (run, metric) plus header
    n_lines = len(paths["long"].read_text().splitlines())
    assert n_lines == 1 + 16 * len(Metrics.names())


def test_summary_digest_tracks_content(small_battery):
    a = build_summary(small_battery.rows)
    rows = [dict(r) for r in small_battery.rows]
    rows[0]["av_wlp"] += 1.0
    b = build_summary(rows)
    assert a["groups"]["algorithm"]["digest"] != b["groups"]["algorithm"]["digest"]


def test_run_csv_schema(case9, tmp_path):
    rec, _ = run_test(case9)
    path = write_run_csv(rec, tmp_path / "r.csv")
    header = path.read_text().splitlines()[0].split(",")
    assert header == run_csv_columns(case9.n_c, case9.n_d)
    data = read_run_csv(path)
    assert len(data) == len(header)
    np.testing.assert_allclose(data["T_0"], rec.T_true[:, 0], rtol=1e-9)


def test_export_error_has_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(ExportError, match="file"):
        write_results_csv([_row("FCA")], blocker / "sub" / "results.csv")


# config and CLI

def test_config_defaults_and_overrides(tmp_path):
    cfg = load_config()
    assert cfg.scenario_spec() == ScenarioSpec()
    f = tmp_path / "c.yaml"
    f.write_text("scenario:\n  T_L: 80\nplant:\n  chip_seed: 7\n")
    cfg = load_config(f)
    assert cfg.scenario_spec().T_L == 80 and cfg.plant.chip_seed == 7
    assert cfg.scenario_spec(seed=None).seed == 0
    f.write_text("scenario:\n  T_LL: 80\n")
    with pytest.raises(ConfigError):
        load_config(f)


def test_cli_run_and_export(tmp_path, capsys):
    out = tmp_path / "run"
    assert cli_main(["run", "--quick", "--duration", "0.02", "--cores", "9", "--algorithm", "EBA",
                     "--out", str(out)]) == 0
    assert (out / "run.csv").exists() and (out / "controller.csv").exists()
    m = json.loads((out / "metrics.json").read_text())["metrics"]
    assert m["aborted"] == 0
    bo = tmp_path / "bat"
    assert cli_main(["battery", "--quick", "--duration", "0.01", "--seeds", "1", "--workload", "MAX-WL",
                     "--cooling", "AIR", "--domains", "1D,4D", "--out", str(bo)]) == 0
    assert len(read_results_csv(bo / "results.csv")) == 6
    (bo / "summary.json").unlink()
    assert cli_main(["export", str(bo / "results.csv")]) == 0
    assert (bo / "summary.json").exists()
    assert cli_main(["run", "--workload", "NOPE"]) == 2
    assert "error" in capsys.readouterr().err
