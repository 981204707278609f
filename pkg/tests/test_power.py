import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hpcdtm.actuators import DomainConfigError, DomainMap, OperatingGrid
from hpcdtm.calibration import AnchorSet, calibrate, leakage_ratio
from hpcdtm.power import (CorePowerParams, PowerConstraintError, apply_process_variation,
                          core_power, dynamic_power, leakage_factor, rail_power, static_power)
from hpcdtm.workload import DEFAULT_CEFF, WorkloadClass

P = CorePowerParams()
VEC = DEFAULT_CEFF[WorkloadClass.VECTOR]
IDLE = DEFAULT_CEFF[WorkloadClass.IDLE]
V_MAX, T_MAX = 1.2, 95.0


def test_degenerate_leakage_is_one():
    p = CorePowerParams(k_v=0.0, k_T=0.0, k_T0=0.0)
    np.testing.assert_allclose(leakage_factor(np.array([-20, 25, 150.0]), np.array([0.5, 0.8, 1.2]), p), 1.0)


@given(st.floats(-20, 150), st.floats(-20, 150), st.floats(0.5, 1.2))
def test_leakage_temperature_ratio(t1, t2, v):
    r = leakage_factor(t2, v, P) / leakage_factor(t1, v, P)
    assert r == pytest.approx(np.exp(P.k_T * (t2 - t1)), rel=1e-12)


def test_static_floor():
    p = CorePowerParams(I_cc=1e-300)
    assert core_power(2.0, 1.0, 60.0, 0.0, p) == pytest.approx(p.k_s0)


def test_anchors_within_one_percent():
    d1 = core_power(2.90, 0.90, 75.0, VEC, P) - core_power(2.85, 0.90, 75.0, VEC, P)
    d2 = core_power(2.95, 0.95, 75.0, VEC, P) - core_power(2.90, 0.90, 75.0, VEC, P)
    p3 = core_power(0.40, V_MAX, 75.0, VEC, P)
    assert d1 == pytest.approx(0.0627, rel=0.01)
    assert d2 == pytest.approx(0.7407, rel=0.01)
    assert p3 == pytest.approx(5.52, rel=0.01)


def test_leakage_ratio_near_ten():
    assert 8.0 <= leakage_ratio(P, V_MAX, T_MAX) <= 12.0


def test_calibration_reproduces_shipped_defaults():
    res = calibrate()
    for name in ("k_s0", "I_cc", "k_v", "k_T", "k_T0"):
        assert getattr(res.params, name) == pytest.approx(getattr(P, name), rel=1e-4)
    assert res.ceff_vector == pytest.approx(VEC, rel=1e-4)
    primary = [a.name for a in AnchorSet().anchors if a.weight == 1.0]
    assert all(abs(res.residuals[n]) < 0.01 for n in primary)


def test_idle_leakage_dominates_at_corner():
    assert static_power(V_MAX, T_MAX, P) >= dynamic_power(3.45, V_MAX, IDLE, P)


@given(st.floats(0.4, 3.4), st.floats(0.5, 1.15), st.floats(0, 120), st.floats(0.01, 2.0),
       st.sampled_from(["F", "V", "T"]))
def test_strictly_increasing(F, V, T, c, which):
    base = core_power(F, V, T, c, P)
    bumped = {"F": (F + 0.05, V, T), "V": (F, V + 0.05, T), "T": (F, V, T + 1.0)}[which]
    assert core_power(*bumped, c, P) > base


def test_infeasible_pair_rejected():
    g = OperatingGrid.default()
    with pytest.raises(PowerConstraintError):
        core_power(3.45, 0.6, 50.0, VEC, P, grid=g)
    assert core_power(0.4, 0.5, 50.0, VEC, P, grid=g) > 0


def test_process_variation():
    same = apply_process_variation(P, 16, 0.0, np.random.default_rng(0))
    np.testing.assert_array_equal(same.icc_scale, 1.0)
    a = apply_process_variation(P, 8, 0.1, np.random.default_rng(5))
    b = apply_process_variation(P, 8, 0.1, np.random.default_rng(5))
    np.testing.assert_array_equal(a.icc_scale, b.icc_scale)
    np.testing.assert_array_equal(a.ceff_scale, b.ceff_scale)
    big = apply_process_variation(P, 10**4, 0.1, np.random.default_rng(9))
    for m in (big.icc_scale, big.ceff_scale):
        assert 0.9 <= m.min() and m.max() <= 1.1
        assert abs(m.mean() - 1.0) < 0.01
    with pytest.raises(ValueError):
        apply_process_variation(P, 4, 0.2, np.random.default_rng(0))


def test_rail_power():
    one = rail_power(np.arange(9.0), DomainMap.single(9))
    assert one.per_rail.tolist() == [one.total] == [36.0]
    four = rail_power(np.ones(36), DomainMap.blocks(6, 6, 4))
    assert four.per_rail.tolist() == [9.0] * 4 and four.total == 36.0
    with pytest.raises(DomainConfigError):
        rail_power(np.ones(8), DomainMap.single(9))


@given(st.lists(st.floats(0, 20), min_size=9, max_size=9), st.sampled_from([1, 3, 9]))
def test_rail_total_matches_summation(powers, n_d):
    r = rail_power(powers, DomainMap.blocks(3, 3, n_d))
    assert r.total == pytest.approx(sum(powers), rel=1e-9, abs=1e-12)
    assert r.total == pytest.approx(float(np.sum(r.per_rail)), rel=1e-9, abs=1e-12)
