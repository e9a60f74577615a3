"""Illustrative default inputs.

The rate curves below are plausible Aedes aegypti shapes (Briere-type
development, U-shaped mortality, humped oviposition) tabulated on a 1 C
grid from 10 to 40 C.  They are placeholders for site-specific laboratory
curves, not fitted values.  The synthetic temperature profile mimics a
subtropical coastal climate (about 20 C in January, 29 C in August).
"""
from __future__ import annotations

import numpy as np

from .controls import CarryingCapacityModel
from .environment import Environment, RateCurve, RateSet, SeasonalTemperature
from .risk import EpidemiologicalParams

TEMP_GRID = np.arange(10.0, 41.0, 1.0)


def _briere(T, c, t_min, t_max, floor):
    core = np.where((T > t_min) & (T < t_max), c * T * (T - t_min) * np.sqrt(np.clip(t_max - T, 0, None)), 0.0)
    return np.maximum(core, floor)


def _tabulate(values) -> RateCurve:
    return RateCurve(TEMP_GRID, np.round(values, 6))


def default_rate_set() -> RateSet:
    T = TEMP_GRID
    return RateSet(
        dev_egg=_tabulate(_briere(T, 2.1e-4, 10.0, 40.0, 0.02)),
        dev_larva=_tabulate(_briere(T, 9.6e-5, 10.0, 40.0, 0.01)),
        dev_pupa=_tabulate(_briere(T, 2.75e-4, 10.0, 40.0, 0.02)),
        dev_gonotrophic=_tabulate(_briere(T, 2.1e-4, 12.0, 38.0, 0.02)),
        mort_egg=_tabulate(0.05 + 5e-4 * (T - 25.0) ** 2),
        mort_larva=_tabulate(0.08 + 1e-3 * (T - 25.0) ** 2),
        mort_pupa=_tabulate(0.05 + 8e-4 * (T - 25.0) ** 2),
        mort_adult=_tabulate(0.06 + 8e-4 * (T - 24.0) ** 2),
        oviposition=_tabulate(80.0 * np.exp(-(((T - 27.0) / 8.0) ** 2))),
        bites_per_cycle=_tabulate(np.clip(0.6 + 0.035 * (T - 15.0), 0.6, 1.2)),
        eip_rate=_tabulate(_briere(T, 7.5e-5, 14.0, 40.0, 0.01)),
    )


def synthetic_profile(mean_c: float = 24.75, amplitude_c: float = 4.5, coldest_day: int = 20) -> SeasonalTemperature:
    """Pure sinusoidal seasonal cycle, coldest on ``coldest_day``."""
    days = np.arange(1, 367)
    values = mean_c - amplitude_c * np.cos(2 * np.pi * (days - coldest_day) / 365.0)
    return SeasonalTemperature(values)


def default_environment(profile: SeasonalTemperature | None = None, start_day_of_year: int = 1) -> Environment:
    return Environment(profile or synthetic_profile(), default_rate_set(), start_day_of_year)


DEFAULT_C0 = 10_000.0


def default_capacity(c0: float = DEFAULT_C0) -> CarryingCapacityModel:
    return CarryingCapacityModel(c0=c0)


def default_epi() -> EpidemiologicalParams:
    return EpidemiologicalParams(human_population=5_000.0, intrinsic_incubation_days=5.0, phi_hv=0.5, phi_vh=0.5)
