import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from hpcdtm.thermal import (COPPER, SILICON, CoolingVariant, Floorplan, GeometryError, Material,
                            MaterialProps, NoiseSpec, StabilityError, ThermalNetwork,
                            build_thermal_network, discretize, lumped_rc, sense_temperatures,
                            spreading_resistance, thermal_step)

# frozen from an independent hand calculation (plain floats, no package code)
SI_CELL_C = 0.00746532          # J/K, 3 mm x 3 mm x 0.5 mm silicon
SI_CELL_RV = 0.37537537537537535  # K/W
SI_CELL_RH = 13.513513513513514   # K/W
# closed-form constriction formula evaluated by a standalone script
SPREAD_1CM2_100CM2 = 0.11951769662854589   # K/W, isothermal far face
SPREAD_1CM2_100CM2_H1000 = 0.27212291786172693  # K/W, h = 1000 W/(m^2 K)


def rotation_perm(n):
    """Core permutation of a 90 degree rotation of an n x n grid, extended to all states."""
    core = np.empty(n * n, dtype=int)
    for r in range(n):
        for c in range(n):
            core[r * n + c] = c * n + (n - 1 - r)
    perm = np.empty(2 * n * n + 4, dtype=int)
    perm[0:2 * n * n:2] = 2 * core
    perm[1:2 * n * n:2] = 2 * core + 1
    perm[2 * n * n:] = np.arange(2 * n * n, 2 * n * n + 4)
    return perm


# lumped_rc

def test_unit_cube_unit_heat_capacity():
    cap, _, _ = lumped_rc((1.0, 1.0, 1.0), Material(1.0, 1.0, 1.0))
    assert cap == pytest.approx(1.0)


def test_silicon_cell_hand_calculation():
    cap, rv, rh = lumped_rc((3e-3, 3e-3, 0.5e-3), SILICON)
    assert cap == pytest.approx(SI_CELL_C, rel=1e-12)
    assert rv == pytest.approx(SI_CELL_RV, rel=1e-12)
    assert rh == pytest.approx(SI_CELL_RH, rel=1e-12)


@given(st.floats(1e-4, 1e-2), st.floats(1e-4, 1e-2), st.floats(1e-5, 1e-2), st.sampled_from([0, 1, 2]))
def test_capacitance_linear_in_each_dimension(h, w, l, axis):
    dims = [h, w, l]
    c1, _, _ = lumped_rc(dims, COPPER)
    dims[axis] *= 2
    c2, _, _ = lumped_rc(dims, COPPER)
    assert c2 == pytest.approx(2 * c1, rel=1e-12)


def test_rejects_non_positive_dimension():
    with pytest.raises(GeometryError):
        lumped_rc((1e-3, 0.0, 1e-3), SILICON)


# spreading_resistance

def test_equal_areas_is_plain_conduction():
    r = spreading_resistance(1e-4, 1e-4, 2e-3, 400.0)
    assert r == pytest.approx(2e-3 / (400.0 * 1e-4), rel=1e-12)


def test_spreading_against_scripted_formula():
    assert spreading_resistance(1e-4, 1e-2, 5e-3, 237.0) == pytest.approx(SPREAD_1CM2_100CM2, rel=1e-12)
    assert spreading_resistance(1e-4, 1e-2, 5e-3, 237.0, h_coeff=1000.0) == pytest.approx(
        SPREAD_1CM2_100CM2_H1000, rel=1e-12)


@given(st.floats(1e-6, 1e-3), st.floats(1.01, 50.0))
def test_smaller_source_more_resistance(a, shrink):
    plate = 1e-2
    big = spreading_resistance(min(a * shrink, plate), plate, 3e-3, 237.0)
    small = spreading_resistance(min(a * shrink, plate) / shrink, plate, 3e-3, 237.0)
    assert small > big >= 0


def test_source_larger_than_plate_rejected():
    with pytest.raises(GeometryError):
        spreading_resistance(2e-4, 1e-4, 1e-3, 237.0)


# network structure

@pytest.mark.parametrize("kind", ["WATER", "AIR", "RACK"])
@pytest.mark.parametrize("n", [1, 2, 3, 6])
def test_network_structure(n, kind):
    net = build_thermal_network(Floorplan(n, n), cooling=CoolingVariant.named(kind))
    assert net.n_s == 2 * n * n + 4
    A = net.A
    off = A - np.diag(np.diag(A))
    assert off.min() >= 0
    assert np.all(A.sum(axis=1) <= 1e-12 * np.abs(np.diag(A)))
    assert net.B.min() >= 0
    # heat leaves only through modelled paths: row sum + ambient coupling == 0
    np.testing.assert_allclose(A.sum(axis=1) + net.b_amb, 0.0, atol=1e-9 * np.abs(A).max())
    assert len(net.state_layout) == net.n_s


def test_single_core_has_only_vertical_chain():
    net = build_thermal_network(Floorplan(1, 1))
    assert net.A.shape == (6, 6)
    links = {(i, j) for i in range(6) for j in range(6) if i != j and net.A[i, j] > 0}
    # Si-Cu, Cu-Al, Si-PCB, Al-air, PCB-MB, MB-air (both directions)
    expected = {(0, 1), (1, 2), (0, 3), (2, 5), (3, 4), (4, 5)}
    assert links == expected | {(j, i) for i, j in expected}


@pytest.mark.parametrize("n", [3, 4])
def test_uniform_cooling_rotation_symmetric(n):
    net = build_thermal_network(Floorplan(n, n), cooling=CoolingVariant.water())
    p = rotation_perm(n)
    np.testing.assert_allclose(net.A[np.ix_(p, p)], net.A, rtol=1e-12, atol=1e-15)


def test_air_steady_state_centre_hottest():
    net = build_thermal_network(Floorplan(3, 3), cooling=CoolingVariant.air())
    P = np.full(9, 5.0)
    # independent linear solve of A T = -(B P + b_amb T_amb)
    T = np.linalg.lstsq(net.A, -(net.B @ P + net.b_amb * 25.0), rcond=None)[0]
    Tsi = T[0:18:2]
    corners, edges, centre = Tsi[[0, 2, 6, 8]], Tsi[[1, 3, 5, 7]], Tsi[4]
    assert centre > edges.max() and edges.min() > corners.max()


def test_rack_hotter_towards_the_back():
    net = build_thermal_network(Floorplan(3, 3), cooling=CoolingVariant.rack())
    Tsi = net.steady_state(np.full(9, 5.0))[0:18:2].reshape(3, 3)
    assert np.all(np.diff(Tsi.mean(axis=0)) > 0)


def test_time_constant_clusters():
    tc = build_thermal_network(Floorplan(3, 3)).time_constants()
    for target in (1e-3, 0.1, 10.0):
        assert np.any((tc >= target / 3) & (tc <= target * 3)), target


def test_matrix_dump(tmp_path):
    net = build_thermal_network(Floorplan(2, 2))
    net.dump(tmp_path / "m.txt")
    back = np.loadtxt(tmp_path / "m.txt")
    np.testing.assert_allclose(back[:, :net.n_s], net.A, rtol=1e-11)


# discretize / step

def test_scalar_closed_form():
    tau, dt = 0.2, 1e-3
    net = ThermalNetwork(A=np.array([[-1 / tau]]), B=np.array([[1.0]]), b_amb=np.array([1 / tau]),
                         C_out=np.eye(1), state_layout=["x"], ambient_temp=0.0)
    m = discretize(net, dt)
    assert m.Ad[0, 0] == pytest.approx(np.exp(-dt / tau), rel=1e-13)


def test_small_dt_limit():
    net = build_thermal_network(Floorplan(2, 2))
    m = discretize(net, 1e-9)
    np.testing.assert_allclose(m.Ad, np.eye(net.n_s), atol=1e-5)
    assert np.abs(m.Bd).max() < 1e-5


def test_semigroup_two_state_cell():
    net = build_thermal_network(Floorplan(1, 1))
    dt, N = 5e-5, 20
    one = discretize(net, dt)
    big = discretize(net, N * dt, max_ratio=1.0)
    np.testing.assert_allclose(np.linalg.matrix_power(one.Ad, N), big.Ad, rtol=1e-9, atol=1e-12)
    # independent oracle for the transition matrix
    np.testing.assert_allclose(big.Ad, expm(net.A * N * dt), rtol=1e-9, atol=1e-12)


def test_step_too_large():
    with pytest.raises(StabilityError):
        discretize(build_thermal_network(Floorplan(3, 3)), 1e-3)


def test_spectral_radius_below_one():
    m = discretize(build_thermal_network(Floorplan(3, 3)), 5e-5)
    assert np.max(np.abs(np.linalg.eigvals(m.Ad))) < 1


def test_ambient_equilibrium_unchanged():
    net = build_thermal_network(Floorplan(3, 3))
    m = discretize(net, 5e-5)
    x0 = m.state.copy()
    thermal_step(m, np.zeros(9), 25.0)
    np.testing.assert_allclose(m.state, x0, atol=1e-12)


def test_negative_power_rejected():
    m = discretize(build_thermal_network(Floorplan(2, 2)), 5e-5)
    with pytest.raises(ValueError):
        thermal_step(m, [-1.0, 0, 0, 0], 25.0)


def test_steady_state_from_stepping_matches_solve():
    net = build_thermal_network(Floorplan(2, 2))
    P = np.array([3.0, 5.0, 1.0, 4.0])
    m = discretize(net, 5e-5)
    # jump far ahead with one long exact step, then a few ordinary steps
    far = discretize(net, 2000.0, max_ratio=np.inf)
    x = far.Ad @ m.state + far.Bd @ P + far.bd_amb * 25.0
    m.state = x
    for _ in range(10):
        thermal_step(m, P, 25.0)
    ref = net.steady_state(P)
    np.testing.assert_allclose(m.state, ref, rtol=1e-6)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(0, 10), min_size=4, max_size=4), st.lists(st.floats(0, 10), min_size=4, max_size=4))
def test_linearity_superposition(p1, p2):
    net = build_thermal_network(Floorplan(2, 2))
    rise = lambda P: net.steady_state(P) - net.steady_state(np.zeros(4))
    np.testing.assert_allclose(rise(np.add(p1, p2)), rise(p1) + rise(p2), atol=1e-9)
    np.testing.assert_allclose(rise(2 * np.asarray(p1)), 2 * rise(p1), atol=1e-9)


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(-30, 80), min_size=12, max_size=12))
def test_passivity_max_norm_decreasing(offsets):
    net = build_thermal_network(Floorplan(2, 2))
    m = discretize(net, 5e-5, initial_state=25.0 + np.asarray(offsets))
    dev = [np.abs(m.state - 25.0).max()]
    for _ in range(200):
        thermal_step(m, np.zeros(4), 25.0)
        dev.append(np.abs(m.state - 25.0).max())
    assert np.all(np.diff(dev) <= 1e-12)


# sensing

def test_zero_noise_exact():
    net = build_thermal_network(Floorplan(2, 2))
    x = np.linspace(30, 60, net.n_s)
    out = sense_temperatures(x, net.C_out, NoiseSpec(0.0), np.random.default_rng(0))
    np.testing.assert_array_equal(out, x[0:8:2])


def test_noise_deterministic_and_calibrated():
    C = np.eye(1)
    a = [sense_temperatures([50.0], C, NoiseSpec(1.0), np.random.default_rng(3)) for _ in range(2)]
    np.testing.assert_array_equal(a[0], a[1])
    rng = np.random.default_rng(1)
    C = np.ones((10**6, 1))
    samples = sense_temperatures([0.0], C, NoiseSpec(1.0), rng)
    assert np.std(samples) == pytest.approx(1.0 / 3.0, rel=0.05)


def test_material_props_positive():
    with pytest.raises(GeometryError):
        MaterialProps(sink_to_air=0.0)
    with pytest.raises(GeometryError):
        Floorplan(2, 2, cell_width=-1.0)
