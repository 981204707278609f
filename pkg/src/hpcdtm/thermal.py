"""Lumped-parameter RC thermal model of the chiplet and its cooling path.

State layout: one silicon and one copper (heat-spreader) node per core, then
the aluminium heat sink, the PCB (interposer merged in), the motherboard and
the enclosure air. The air node exchanges heat with a fixed ambient, which
enters the model as an input next to the core powers::

    dT/dt = A T + B P + b_amb T_amb,    T_Si = C_out T
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm


class GeometryError(ValueError):
    """Non-positive or inconsistent dimensions."""


class StabilityError(ValueError):
    """Integration step too large for the fastest thermal mode."""


@dataclass(frozen=True)
class Material:
    density: float        # kg/m^3
    specific_heat: float  # J/(kg K)
    conductivity: float   # W/(m K)

    @property
    def volumetric_heat(self) -> float:
        return self.density * self.specific_heat


SILICON = Material(2330.0, 712.0, 148.0)
COPPER = Material(8960.0, 385.0, 401.0)
ALUMINIUM_K = 237.0  # W/(m K), heat-sink base


@dataclass(frozen=True)
class Floorplan:
    """Regular grid of cores, one thermal cell per core."""

    grid_rows: int = 3
    grid_cols: int = 3
    cell_width: float = 3e-3      # m, along columns
    cell_length: float = 3e-3     # m, along rows
    si_thickness: float = 0.25e-3
    cu_thickness: float = 2.0e-3
    core_positions: tuple | None = None  # core index -> (row, col); row-major if None

    def __post_init__(self):
        if self.grid_rows <= 0 or self.grid_cols <= 0:
            raise GeometryError("grid must have at least one row and column")
        dims = (self.cell_width, self.cell_length, self.si_thickness, self.cu_thickness)
        if min(dims) <= 0:
            raise GeometryError("all floorplan dimensions must be positive")
        pos = self.positions()
        if sorted(pos) != [(r, c) for r in range(self.grid_rows) for c in range(self.grid_cols)]:
            raise GeometryError("core positions must be a bijection onto grid cells")

    @property
    def n_c(self) -> int:
        return self.grid_rows * self.grid_cols

    @property
    def cell_area(self) -> float:
        return self.cell_width * self.cell_length

    @property
    def die_area(self) -> float:
        return self.n_c * self.cell_area

    def positions(self) -> list:
        if self.core_positions is None:
            return [divmod(i, self.grid_cols) for i in range(self.n_c)]
        return [tuple(p) for p in self.core_positions]


@dataclass(frozen=True)
class MaterialProps:
    """Material constants and lumped parameters of the package layers.

    Values tagged "per core" are normalised to one core's footprint: a
    resistance is the share carried by one core (the layer total is this
    divided by n_c), a capacitance is multiplied by n_c for the layer total.
    This keeps temperatures and time constants comparable between floorplan sizes.
    """

    silicon: Material = SILICON
    copper: Material = COPPER
    tim1_resistivity: float = 1.5e-6     # m^2 K/W, die -> spreader
    tim2_resistivity: float = 2.0e-5     # m^2 K/W, spreader -> heat sink
    sink_base_ratio: float = 4.0         # heat-sink base area / die area
    sink_base_thickness: float = 5e-3    # m
    sink_conductivity: float = ALUMINIUM_K
    sink_capacitance: float = 6.0        # J/K per core
    sink_to_air: float = 1.5             # K/W per core
    si_to_pcb: float = 40.0              # K/W per core
    pcb_capacitance: float = 0.6         # J/K per core
    pcb_to_mb: float = 6.0               # K/W per core
    mb_capacitance: float = 6.0          # J/K per core
    mb_to_air: float = 12.0              # K/W per core
    air_capacitance: float = 8.0         # J/K per core
    air_to_ambient: float = 0.5          # K/W per core

    def __post_init__(self):
        vals = [v for k, v in self.__dict__.items() if isinstance(v, float)]
        for m in (self.silicon, self.copper):
            vals += [m.density, m.specific_heat, m.conductivity]
        if min(vals) <= 0:
            raise GeometryError("material properties must be strictly positive")


class CoolingKind(str, enum.Enum):
    WATER = "WATER"
    AIR = "AIR"
    RACK = "RACK"


@dataclass(frozen=True)
class CoolingVariant:
    """Heat-sink resistance profile over the die.

    WATER: uniform and strong. AIR: Gaussian bump of the spreader->sink
    resistance centred on the die. RACK: resistance grows linearly from the
    front column to the back column, with extra lateral coupling between
    neighbouring columns.
    """

    kind: CoolingKind = CoolingKind.WATER
    sink_scale: float = 1.0        # multiplier on sink -> air resistance
    gauss_amp: float = 0.0         # AIR: peak relative increase at the die centre
    gauss_sigma: float = 1.0       # AIR: width in cell pitches (scaled to a 3x3 die)
    col_gradient: float = 0.0      # RACK: relative increase front -> back
    col_coupling: float = 0.0      # RACK: extra W/K between adjacent columns (copper nodes)

    @classmethod
    def water(cls) -> "CoolingVariant":
        return cls(CoolingKind.WATER, sink_scale=0.6)

    @classmethod
    def air(cls) -> "CoolingVariant":
        return cls(CoolingKind.AIR, sink_scale=1.0, gauss_amp=0.8, gauss_sigma=1.0)

    @classmethod
    def rack(cls) -> "CoolingVariant":
        return cls(CoolingKind.RACK, sink_scale=1.1, col_gradient=0.9, col_coupling=0.15)

    @classmethod
    def named(cls, kind) -> "CoolingVariant":
        kind = CoolingKind(str(getattr(kind, "value", kind)).upper())
        return {CoolingKind.WATER: cls.water, CoolingKind.AIR: cls.air,
                CoolingKind.RACK: cls.rack}[kind]()

    def resistance_multiplier(self, fp: Floorplan) -> np.ndarray:
        pos = np.array(fp.positions(), dtype=float)
        mult = np.ones(fp.n_c)
        if self.kind is CoolingKind.AIR and self.gauss_amp:
            centre = np.array([(fp.grid_rows - 1) / 2.0, (fp.grid_cols - 1) / 2.0])
            # width relative to die size so 3x3 and 6x6 dies look alike
            sigma = self.gauss_sigma * max(fp.grid_rows, fp.grid_cols) / 3.0
            r2 = np.sum((pos - centre) ** 2, axis=1)
            mult = 1.0 + self.gauss_amp * np.exp(-r2 / (2.0 * sigma * sigma))
        elif self.kind is CoolingKind.RACK and self.col_gradient:
            span = max(fp.grid_cols - 1, 1)
            mult = 1.0 + self.col_gradient * pos[:, 1] / span
        return mult


@dataclass
class ThermalNetwork:
    A: np.ndarray
    B: np.ndarray
    b_amb: np.ndarray
    C_out: np.ndarray
    state_layout: list
    ambient_temp: float = 25.0

    @property
    def n_s(self) -> int:
        return self.A.shape[0]

    @property
    def n_c(self) -> int:
        return self.B.shape[1]

    def time_constants(self) -> np.ndarray:
        """Sorted time constants (s) from the eigenvalues of A."""
        return np.sort(-1.0 / np.real(np.linalg.eigvals(self.A)))

    def steady_state(self, P, T_amb=None) -> np.ndarray:
        """Solve ``0 = A T + B P + b_amb T_amb`` for T."""
        T_amb = self.ambient_temp if T_amb is None else T_amb
        rhs = self.B @ np.asarray(P, dtype=float) + self.b_amb * T_amb
        return np.linalg.solve(self.A, -rhs)

    def dump(self, path) -> None:
        """Plain-text dump of A | B | b_amb with the state labels as header."""
        block = np.column_stack([self.A, self.B, self.b_amb])
        header = "states: " + " ".join(self.state_layout) + \
            f"\ncolumns: A[{self.n_s}] B[{self.n_c}] b_amb[1]"
        np.savetxt(path, block, header=header, fmt="%.12e")


def lumped_rc(dims, material: Material):
    """Capacitance and conduction resistances of one cuboid cell.

    ``dims = (h, w, l)``: h is the in-plane side crossed by lateral heat flow,
    w the other in-plane side and l the layer thickness. Resistances follow
    Fourier conduction, R = length / (k * cross-section)::

        C  = c * rho * h * w * l
        Rv = l / (k * h * w)       through the layer
        Rh = h / (k * w * l)       between neighbouring cells
    """
    h, w, l = (float(d) for d in dims)
    if min(h, w, l) <= 0:
        raise GeometryError(f"cell dimensions must be positive, got {dims}")
    k = material.conductivity
    cap = material.volumetric_heat * h * w * l
    return cap, l / (k * h * w), h / (k * w * l)


def spreading_resistance(source_area, plate_area, plate_thickness, conductivity, h_coeff=None):
    """Total resistance of a plate fed by a smaller concentric heat source.

    Closed form of Lee, Song, Au and Moran (1995) with the area-averaged
    source temperature, the variant used by HotSpot::

        eps = a/b, tau = t/b, Bi = h b / k, lam = pi + 1/(sqrt(pi) eps)
        phi = (tanh(lam tau) + lam/Bi) / (1 + lam/Bi tanh(lam tau))
        psi = eps tau / sqrt(pi) + (1 - eps)^1.5 phi / 2
        R   = psi / (sqrt(pi) k a)

    with a, b the equivalent radii of source and plate. ``h_coeff`` is the
    heat-transfer coefficient on the far face; ``None`` means an isothermal
    far face (Bi -> infinity). The first term of psi is the 1-D conduction
    resistance t/(k A_plate), so equal areas reduce to plain conduction.
    """
    if min(source_area, plate_area, plate_thickness, conductivity) <= 0:
        raise GeometryError("areas, thickness and conductivity must be positive")
    if source_area > plate_area * (1 + 1e-12):
        raise GeometryError("source area exceeds plate area")
    a = np.sqrt(source_area / np.pi)
    b = np.sqrt(plate_area / np.pi)
    eps = min(a / b, 1.0)
    tau = plate_thickness / b
    lam = np.pi + 1.0 / (np.sqrt(np.pi) * eps)
    th = np.tanh(lam * tau)
    if h_coeff is None:
        phi = th
    else:
        bi = h_coeff * b / conductivity
        phi = (th + lam / bi) / (1.0 + lam / bi * th)
    psi = eps * tau / np.sqrt(np.pi) + 0.5 * (1.0 - eps) ** 1.5 * phi
    return float(psi / (np.sqrt(np.pi) * conductivity * a))


def _neighbours(fp: Floorplan):
    """4-neighbourhood pairs (i, j, axis) with i < j; axis 0 = same column, 1 = same row."""
    where = {p: i for i, p in enumerate(fp.positions())}
    pairs = []
    for (r, c), i in where.items():
        for dr, dc, axis in ((1, 0, 0), (0, 1, 1)):
            j = where.get((r + dr, c + dc))
            if j is not None:
                pairs.append((min(i, j), max(i, j), axis))
    return sorted(pairs)


def build_thermal_network(fp: Floorplan = Floorplan(), mats: MaterialProps = MaterialProps(),
                          cooling: CoolingVariant = CoolingVariant.water(), ambient_temp=25.0,
                          cap_scale=None, res_scale=None) -> ThermalNetwork:
    """Assemble A, B, b_amb for the chiplet.

    ``cap_scale`` / ``res_scale`` are optional per-core multipliers on the
    silicon capacitance and die->spreader resistance (process variation).
    """
    n = fp.n_c
    n_s = 2 * n + 4
    i_al, i_pcb, i_mb, i_air = 2 * n, 2 * n + 1, 2 * n + 2, 2 * n + 3
    cap_scale = np.ones(n) if cap_scale is None else np.asarray(cap_scale, dtype=float)
    res_scale = np.ones(n) if res_scale is None else np.asarray(res_scale, dtype=float)

    # row axis: heat crosses cell_length; column axis: heat crosses cell_width
    c_si, rv_si, rh_si_row = lumped_rc((fp.cell_length, fp.cell_width, fp.si_thickness), mats.silicon)
    _, _, rh_si_col = lumped_rc((fp.cell_width, fp.cell_length, fp.si_thickness), mats.silicon)
    c_cu, rv_cu, rh_cu_row = lumped_rc((fp.cell_length, fp.cell_width, fp.cu_thickness), mats.copper)
    _, _, rh_cu_col = lumped_rc((fp.cell_width, fp.cell_length, fp.cu_thickness), mats.copper)
    r_tim1 = mats.tim1_resistivity / fp.cell_area
    r_tim2 = mats.tim2_resistivity / fp.cell_area
    r_spread = spreading_resistance(fp.die_area, fp.die_area * mats.sink_base_ratio,
                                    mats.sink_base_thickness, mats.sink_conductivity) * n

    caps = np.empty(n_s)
    caps[0:2 * n:2] = c_si * cap_scale
    caps[1:2 * n:2] = c_cu
    caps[i_al] = mats.sink_capacitance * n
    caps[i_pcb] = mats.pcb_capacitance * n
    caps[i_mb] = mats.mb_capacitance * n
    caps[i_air] = mats.air_capacitance * n

    G = np.zeros((n_s, n_s))  # symmetric conductance matrix, W/K

    def link(i, j, r):
        G[i, j] += 1.0 / r
        G[j, i] += 1.0 / r

    sink_mult = cooling.resistance_multiplier(fp)
    for i in range(n):
        si, cu = 2 * i, 2 * i + 1
        link(si, cu, (rv_si + r_tim1) * res_scale[i])
        link(cu, i_al, (rv_cu + r_tim2 + r_spread) * sink_mult[i])
        link(si, i_pcb, mats.si_to_pcb)
    for i, j, axis in _neighbours(fp):
        link(2 * i, 2 * j, rh_si_col if axis == 0 else rh_si_row)
        link(2 * i + 1, 2 * j + 1, rh_cu_col if axis == 0 else rh_cu_row)
        if cooling.kind is CoolingKind.RACK and cooling.col_coupling and axis == 1:
            link(2 * i + 1, 2 * j + 1, 1.0 / cooling.col_coupling)
    link(i_al, i_air, mats.sink_to_air * cooling.sink_scale / n)
    link(i_pcb, i_mb, mats.pcb_to_mb / n)
    link(i_mb, i_air, mats.mb_to_air / n)
    g_amb = n / mats.air_to_ambient

    A = G.copy()
    A[np.diag_indices(n_s)] = -G.sum(axis=1)
    A[i_air, i_air] -= g_amb
    A /= caps[:, None]
    B = np.zeros((n_s, n))
    B[2 * np.arange(n), np.arange(n)] = 1.0 / caps[0:2 * n:2]
    b_amb = np.zeros(n_s)
    b_amb[i_air] = g_amb / caps[i_air]
    C_out = np.zeros((n, n_s))
    C_out[np.arange(n), 2 * np.arange(n)] = 1.0

    layout = []
    for i in range(n):
        layout += [f"T_Si,{i + 1}", f"T_Cu,{i + 1}"]
    layout += ["T_Al", "T_PCB", "T_MB", "T_air"]
    return ThermalNetwork(A=A, B=B, b_amb=b_amb, C_out=C_out, state_layout=layout,
                          ambient_temp=ambient_temp)


@dataclass
class DiscreteThermalModel:
    Ad: np.ndarray
    Bd: np.ndarray
    bd_amb: np.ndarray
    dt: float
    C_out: np.ndarray
    state: np.ndarray = field(default=None)

    @property
    def silicon(self) -> np.ndarray:
        return self.C_out @ self.state


def discretize(net: ThermalNetwork, dt: float, method="zoh", max_ratio=0.1,
               initial_state=None) -> DiscreteThermalModel:
    """Fixed-step model at ``dt``; exact zero-order hold by default, ``"euler"`` for debugging.

    Raises :class:`StabilityError` when ``dt`` exceeds ``max_ratio`` of the
    fastest time constant.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    tau_min = float(net.time_constants()[0])
    if dt > max_ratio * tau_min:
        raise StabilityError(f"dt={dt:g}s too large for fastest time constant {tau_min:g}s")
    n_s, n_c = net.n_s, net.n_c
    if method == "zoh":
        M = np.zeros((n_s + n_c + 1, n_s + n_c + 1))
        M[:n_s, :n_s] = net.A
        M[:n_s, n_s:n_s + n_c] = net.B
        M[:n_s, -1] = net.b_amb
        E = expm(M * dt)
        Ad, Bd, bd = E[:n_s, :n_s], E[:n_s, n_s:n_s + n_c], E[:n_s, -1]
    elif method == "euler":
        Ad = np.eye(n_s) + dt * net.A
        Bd, bd = dt * net.B, dt * net.b_amb
    else:
        raise ValueError(f"unknown method {method!r}")
    if initial_state is None:
        initial_state = np.full(n_s, net.ambient_temp)
    return DiscreteThermalModel(Ad=Ad, Bd=Bd, bd_amb=bd, dt=dt, C_out=net.C_out,
                                state=np.array(initial_state, dtype=float))


def thermal_step(model: DiscreteThermalModel, P, T_amb: float) -> np.ndarray:
    """Advance one step with per-core power ``P`` (W); returns the new state."""
    P = np.asarray(P, dtype=float)
    if np.any(P < 0):
        raise ValueError("core power must be non-negative")
    model.state = model.Ad @ model.state + model.Bd @ P + model.bd_amb * T_amb
    return model.state


@dataclass(frozen=True)
class NoiseSpec:
    """Zero-mean Gaussian sensor noise; ``amplitude`` is read as the 3-sigma bound."""

    amplitude: float = 1.0  # degC

    @property
    def sigma(self) -> float:
        return self.amplitude / 3.0


def sense_temperatures(state, C_out, noise: NoiseSpec, rng: np.random.Generator) -> np.ndarray:
    """Silicon temperatures seen by the on-die sensors."""
    t = C_out @ np.asarray(state)
    if noise.amplitude == 0:
        return t
    return t + rng.normal(0.0, noise.sigma, size=t.shape)
