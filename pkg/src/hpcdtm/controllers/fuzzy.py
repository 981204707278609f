"""Lookup-table thermal capping: temperature and its trend move a per-core integer state.

The state is <= 0; each negative unit removes half of the frequency gap
between two consecutive voltage levels of the fmax ladder, so two units
remove one voltage level.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..actuators import OperatingGrid

# rows: dT bins (<0, 0-0.5, 0.5-1, 1-2, >=2); columns: T bins (<45, 45-65, 65-80, 80-T_L, >=T_L)
FUZZY_TABLE = np.array([
    [2, 2, 1, 0, -1],
    [2, 1, 1, 0, -1],
    [1, 1, 0, -1, -2],
    [1, 0, -1, -2, -3],
    [0, 0, -2, -3, -4],
], dtype=int)


@dataclass(frozen=True)
class FuzzyLut:
    values: np.ndarray = field(default_factory=lambda: FUZZY_TABLE.copy())
    temp_edges: tuple = (45.0, 65.0, 80.0)   # degC; the last edge is T_L, given per call
    dT_edges: tuple = (0.0, 0.5, 1.0, 2.0)   # degC over s control periods

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape != (len(self.dT_edges) + 1, len(self.temp_edges) + 2):
            raise ValueError("LUT shape does not match its bins")

    def bins(self, T, dT, T_L):
        t_edges = self.temp_edges + (T_L,)
        col = np.searchsorted(t_edges, T, side="right")
        row = np.searchsorted(self.dT_edges, dT, side="right")
        return row, col

    def increment(self, T, dT, T_L):
        row, col = self.bins(np.asarray(T, dtype=float), np.asarray(dT, dtype=float), T_L)
        return np.asarray(self.values)[row, col]


@dataclass
class FcaState:
    n_c: int
    s: int = 2
    floor: int = -30
    fuzzy_state: np.ndarray = None
    temp_history: np.ndarray = None  # (s+1, n_c) ring buffer
    head: int = -1                   # row holding the newest sample; -1 before the first

    def __post_init__(self):
        if self.s < 1:
            raise ValueError("s must be at least one period")
        if self.fuzzy_state is None:
            self.fuzzy_state = np.zeros(self.n_c, dtype=int)
        if self.temp_history is None:
            self.temp_history = np.zeros((self.s + 1, self.n_c))

    @classmethod
    def for_grid(cls, n_c: int, grid: OperatingGrid, s: int = 2) -> "FcaState":
        # deep enough to walk from the top of the ladder down to the minimum frequency
        return cls(n_c=n_c, s=s, floor=-2 * len(grid.volt_levels))


def fca_fuzzy_update(sensed_T, state: FcaState, lut: FuzzyLut, T_L: float) -> np.ndarray:
    """Push a reading, add the LUT increment and clamp the state to [floor, 0]."""
    T = np.asarray(sensed_T, dtype=float)
    if state.head < 0:
        state.temp_history[:] = T  # cold start: replicate the first sample
        state.head = 0
    else:
        state.head = (state.head + 1) % (state.s + 1)
        state.temp_history[state.head] = T
    oldest = state.temp_history[(state.head + 1) % (state.s + 1)]
    dT = T - oldest
    state.fuzzy_state = np.minimum(np.maximum(state.fuzzy_state + lut.increment(T, dT, T_L), state.floor), 0)
    return state.fuzzy_state


def _ladder(grid: OperatingGrid):
    cached = grid.__dict__.get("_ladder")
    if cached is not None:
        return cached
    # half-level positions: voltage level k sits at 2k; F_min sits one level below the first
    freqs = np.concatenate(([grid.f_min], grid.fmax_per_volt))
    if freqs[1] <= freqs[0]:
        freqs = freqs[1:]
    pos = 2.0 * np.arange(len(freqs)) - 2.0 * (len(freqs) - len(grid.fmax_per_volt))
    grid.__dict__["_ladder"] = (freqs, pos)
    return freqs, pos


def fca_cap_frequency(F_req, fuzzy_state, grid: OperatingGrid) -> np.ndarray:
    """Frequency cap after moving ``|state|`` half levels down the fmax ladder from ``F_req``.

    Rounds to the nearest grid frequency (half up), so an odd state never
    costs a whole extra voltage level on a narrow rung; floored at F_min.
    """
    state = np.asarray(fuzzy_state)
    if (state > 0).any():
        raise ValueError("fuzzy state must be <= 0")
    F_req = np.asarray(F_req, dtype=float)
    freqs, pos = _ladder(grid)
    p = np.interp(F_req, freqs, pos) + state
    cap = np.interp(p, pos, freqs, left=grid.f_min)
    cap = np.where(state == 0, F_req, cap)
    return np.maximum(grid.quantize_freq(np.minimum(cap, F_req), "nearest"), grid.f_min)
