"""Instruction-characterised cycle traces and per-core consumption cursors.

A trace is a run-length encoded sequence of (C_eff, cycles) segments. Cores
walk their trace at the applied frequency; the power model sees the
cycle-weighted mean C_eff of what was executed during each step. Traces
repeat when exhausted so fixed-duration runs never starve.

C_eff values are in nF so that ``C_eff * F[GHz] * V^2`` is in watts.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

CEFF_VECTOR = 1.5481598892438468  # nF, fitted together with the power coefficients


class WorkloadClass(str, enum.Enum):
    VECTOR = "VECTOR"
    INTFLOAT = "INTFLOAT"
    IDLE = "IDLE"
    CLOUD = "CLOUD"


# fixed fractions of the vector figure; ordering vector > int/float > idle
DEFAULT_CEFF = {
    WorkloadClass.VECTOR: CEFF_VECTOR,
    WorkloadClass.INTFLOAT: 0.55 * CEFF_VECTOR,
    WorkloadClass.IDLE: 0.12 * CEFF_VECTOR,
}


@dataclass(frozen=True)
class CycleTrace:
    cls: WorkloadClass
    values: np.ndarray   # C_eff per segment, nF
    counts: np.ndarray   # cycles per segment

    def __post_init__(self):
        if len(self.values) != len(self.counts) or len(self.values) == 0:
            raise ValueError("values and counts must be non-empty and of equal length")
        if np.any(self.values < 0):
            raise ValueError("C_eff must be non-negative")
        if np.any(self.counts <= 0):
            raise ValueError("segment lengths must be positive")

    @property
    def total_cycles(self) -> int:
        return int(np.sum(self.counts))

    @property
    def edges(self) -> np.ndarray:
        """Segment start positions plus the final end position (len n+1)."""
        return np.concatenate(([0.0], np.cumsum(self.counts, dtype=float)))

    @property
    def cum_integral(self) -> np.ndarray:
        """Running integral of C_eff over cycles at each edge (len n+1)."""
        return np.concatenate(([0.0], np.cumsum(self.values * self.counts)))

    def mean(self) -> float:
        return float(np.sum(self.values * self.counts) / self.total_cycles)

    def integral_to(self, x) -> np.ndarray:
        """Integral of C_eff from cycle 0 to position ``x``, wrapping cyclically."""
        x = np.asarray(x, dtype=float)
        total = float(self.total_cycles)
        laps = np.floor(x / total)
        rem = x - laps * total
        return laps * self.cum_integral[-1] + np.interp(rem, self.edges, self.cum_integral)

    def dump(self, path) -> None:
        np.savetxt(path, np.column_stack([self.values, self.counts]), fmt=["%.9g", "%d"],
                   header=f"class={self.cls.value}\nceff_nF cycles")


def generate_trace(cls, duration_cycles: int, rng: np.random.Generator | None = None,
                   ceff_table: dict | None = None, nominal_freq=2.0, seg_ms=(0.1, 10.0)) -> CycleTrace:
    """Build a trace of at least ``duration_cycles`` cycles.

    Constant classes yield a single segment. CLOUD is a piecewise-constant
    random walk inside [idle, vector] whose segment durations are
    log-uniform in ``seg_ms`` milliseconds at ``nominal_freq`` GHz.
    """
    cls = WorkloadClass(getattr(cls, "value", cls))
    if duration_cycles <= 0:
        raise ValueError("duration_cycles must be positive")
    table = dict(DEFAULT_CEFF if ceff_table is None else ceff_table)
    if cls is not WorkloadClass.CLOUD:
        return CycleTrace(cls, np.array([float(table[cls])]), np.array([int(duration_cycles)]))
    if rng is None:
        raise ValueError("CLOUD traces need a seeded generator")
    lo, hi = table[WorkloadClass.IDLE], table[WorkloadClass.VECTOR]
    lg = np.log(np.asarray(seg_ms, dtype=float) * 1e-3 * nominal_freq * 1e9)
    values, counts, total = [], [], 0
    level = rng.uniform(lo, hi)
    while total < duration_cycles:
        n = max(1, int(np.exp(rng.uniform(lg[0], lg[1]))))
        values.append(level)
        counts.append(n)
        total += n
        level = float(np.clip(level + rng.normal(0.0, 0.35 * (hi - lo)), lo, hi))
    return CycleTrace(cls, np.array(values), np.array(counts, dtype=np.int64))


@dataclass
class WorkloadCursor:
    trace: CycleTrace
    cycles_consumed: int = 0
    fractional_cycle: float = 0.0

    @property
    def position(self) -> float:
        return self.cycles_consumed + self.fractional_cycle


def consume_cycles(cursor: WorkloadCursor, F: float, dt: float):
    """Execute ``F * dt`` cycles (F in GHz); returns (mean C_eff over them, cycles executed)."""
    if F <= 0 or dt <= 0:
        raise ValueError("frequency and dt must be positive")
    theta = F * 1e9 * dt
    start = cursor.position
    end = start + theta
    avg = float((cursor.trace.integral_to(end) - cursor.trace.integral_to(start)) / theta)
    whole = int(np.floor(end))
    cursor.cycles_consumed, cursor.fractional_cycle = whole, end - whole
    return avg, theta


def progress(cursor: WorkloadCursor, reference_cycles: float) -> float:
    """Executed work as a percentage of ``reference_cycles``, capped at 100."""
    if reference_cycles <= 0:
        raise ValueError("reference_cycles must be positive")
    return min(100.0, 100.0 * cursor.position / reference_cycles)


@dataclass
class TraceBank:
    """All cores' traces packed into flat arrays for the simulation kernel.

    Core ``i`` owns ``edges[offsets[i]:offsets[i+1]]`` and the matching
    slice of ``cum``.
    """

    traces: list
    edges: np.ndarray = field(init=False)
    cum: np.ndarray = field(init=False)
    offsets: np.ndarray = field(init=False)

    def __post_init__(self):
        self.edges = np.concatenate([t.edges for t in self.traces])
        self.cum = np.concatenate([t.cum_integral for t in self.traces])
        sizes = [len(t.counts) + 1 for t in self.traces]
        self.offsets = np.concatenate(([0], np.cumsum(sizes))).astype(np.int64)

    @property
    def n_c(self) -> int:
        return len(self.traces)
