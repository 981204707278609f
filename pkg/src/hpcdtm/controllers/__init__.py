"""Low-level power/thermal controllers and their shared building blocks."""

from .base import (PI, T_CRIT, T_LIMIT, ControlCommand, Controller, ControllerInputs,
                   PowerEstimator, pid_step)
from .bisection import Conv2FResult, conv2f_bisection, conv2f_domains
from .distribution import fca_power_distribute, water_fill_groups
from .eba import EbaController, EbaGains
from .fca import FcaController, FcaGains
from .fuzzy import FUZZY_TABLE, FcaState, FuzzyLut, fca_cap_frequency, fca_fuzzy_update
from .vba import VbaController, VbaGains

ALGORITHMS = {"VBA": VbaController, "EBA": EbaController, "FCA": FcaController}


def make_controller(name: str, grid, domains, Ts=500e-6, estimator=None, gains=None,
                    lut=None) -> Controller:
    try:
        cls = ALGORITHMS[name.upper()]
    except KeyError:
        raise ValueError(f"unknown algorithm {name!r}; choose from {sorted(ALGORITHMS)}") from None
    if lut is not None:
        if cls is not FcaController:
            raise ValueError(f"{name} does not use a fuzzy table")
        return cls(grid, domains, Ts=Ts, estimator=estimator, gains=gains, lut=lut)
    return cls(grid, domains, Ts=Ts, estimator=estimator, gains=gains)


__all__ = [
    "ALGORITHMS", "PI", "T_CRIT", "T_LIMIT", "ControlCommand", "Controller", "ControllerInputs",
    "Conv2FResult", "EbaController", "EbaGains", "FUZZY_TABLE", "FcaController", "FcaGains",
    "FcaState", "FuzzyLut", "PowerEstimator", "VbaController", "VbaGains", "conv2f_bisection",
    "conv2f_domains", "fca_cap_frequency", "fca_fuzzy_update", "fca_power_distribute",
    "make_controller", "pid_step", "water_fill_groups",
]
