"""Temperature forcing and temperature-dependent entomological rates.

Raw daily temperatures are reduced to a 365-day seasonal cycle (per
day-of-year mean across years, then a centered circular moving average).
Rate curves are tabulated ``(temp_c, rate)`` samples evaluated by linear
interpolation with clamping at the ends of the grid.
"""
from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "TemperatureError",
    "TemperatureSeries",
    "SeasonalTemperature",
    "RateCurve",
    "RateSet",
    "load_temperature_series",
    "seasonal_profile",
    "circular_moving_average",
    "temperature_at",
    "rate_at",
]

DAYS_PER_CYCLE = 365
TEMP_SANITY_BOUND = 60.0


class TemperatureError(ValueError):
    """Malformed, inconsistent or incomplete temperature data."""


@dataclass(frozen=True)
class TemperatureSeries:
    dates: tuple[dt.date, ...]
    temps: np.ndarray

    def __post_init__(self):
        temps = np.asarray(self.temps, dtype=float)
        if temps.shape != (len(self.dates),):
            raise TemperatureError("dates and temperatures differ in length")
        for a, b in zip(self.dates, self.dates[1:]):
            if b == a:
                raise TemperatureError(f"duplicate date {a.isoformat()}")
            if b < a:
                raise TemperatureError(f"dates not increasing at {b.isoformat()}")
        bad = ~np.isfinite(temps) | (np.abs(temps) > TEMP_SANITY_BOUND)
        if bad.any():
            i = int(np.argmax(bad))
            raise TemperatureError(
                f"temperature {temps[i]!r} on {self.dates[i].isoformat()} outside "
                f"[-{TEMP_SANITY_BOUND}, {TEMP_SANITY_BOUND}] C"
            )
        object.__setattr__(self, "temps", temps)

    def __len__(self) -> int:
        return len(self.dates)


def load_temperature_series(
    path: str | Path, date_column: str = "date", temp_column: str = "temp_c"
) -> TemperatureSeries:
    """Read a ``date,temp_c`` CSV (ISO-8601 dates) into a validated series.

    Rows may appear in any order; they are sorted by date.  A duplicated
    date raises :class:`TemperatureError`, as does any unparseable row (the
    message names the line number).
    """
    path = Path(path)
    rows: list[tuple[dt.date, float]] = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {date_column, temp_column} - set(reader.fieldnames or ())
        if missing:
            raise TemperatureError(f"{path}: missing column(s) {sorted(missing)}")
        for row in reader:
            line = reader.line_num
            try:
                day = dt.date.fromisoformat(row[date_column].strip())
                temp = float(row[temp_column])
            except (ValueError, AttributeError, TypeError) as exc:
                raise TemperatureError(f"{path}:{line}: cannot parse row {row!r}: {exc}") from None
            rows.append((day, temp))
    rows.sort(key=lambda r: r[0])
    seen = set()
    for day, _ in rows:
        if day in seen:
            raise TemperatureError(f"{path}: duplicate date {day.isoformat()}")
        seen.add(day)
    return TemperatureSeries(tuple(r[0] for r in rows), np.array([r[1] for r in rows]))


def circular_moving_average(values: np.ndarray, window: int) -> np.ndarray:
    """Centered moving average with wraparound; ``window`` must be odd."""
    if window < 1 or window % 2 == 0:
        raise ValueError(f"window must be a positive odd integer, got {window}")
    values = np.asarray(values, dtype=float)
    half = window // 2
    padded = np.concatenate([values[-half:], values, values[:half]]) if half else values
    kernel = np.full(window, 1.0 / window)
    return np.convolve(padded, kernel, mode="valid")


@dataclass(frozen=True)
class SeasonalTemperature:
    """Smoothed temperature per day of year.

    ``day_of_year_temp[d - 1]`` is the value for day ``d`` (1..366).  The
    forcing is periodic with a 365-day cycle; entry 366 is stored for
    completeness but never reached by :func:`temperature_at`.
    """

    day_of_year_temp: np.ndarray
    smoothing_window_days: int = 1

    def __post_init__(self):
        values = np.asarray(self.day_of_year_temp, dtype=float)
        if values.shape != (366,):
            raise TemperatureError(f"expected 366 day-of-year entries, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise TemperatureError("seasonal profile contains non-finite entries")
        if self.smoothing_window_days < 1:
            raise TemperatureError("smoothing window must be positive")
        object.__setattr__(self, "day_of_year_temp", values)

    @classmethod
    def constant(cls, temp_c: float) -> "SeasonalTemperature":
        return cls(np.full(366, float(temp_c)))

    def resmooth(self, window_days: int) -> "SeasonalTemperature":
        cycle = circular_moving_average(self.day_of_year_temp[:DAYS_PER_CYCLE], window_days)
        extra = _smooth_leap_entry(self.day_of_year_temp, window_days)
        return SeasonalTemperature(np.append(cycle, extra), window_days)

    def __call__(self, t, start_day_of_year: int = 1):
        return temperature_at(self, t, start_day_of_year)


def _smooth_leap_entry(raw: np.ndarray, window: int) -> float:
    # day 366 sits between day 365 and day 1 of the next cycle
    half = window // 2
    before = raw[DAYS_PER_CYCLE - half:DAYS_PER_CYCLE] if half else raw[:0]
    after = raw[:half]
    return float(np.mean(np.concatenate([before, raw[365:366], after])))


def seasonal_profile(series: TemperatureSeries, window_days: int = 7) -> SeasonalTemperature:
    """Average each day-of-year across years, then smooth circularly.

    Day 366 is copied from day 365 when the input has no leap day.  An
    isolated missing day is imputed from its two neighbours; longer gaps
    raise :class:`TemperatureError` listing the missing days.
    """
    if window_days < 1 or window_days % 2 == 0:
        raise ValueError(f"window_days must be a positive odd integer, got {window_days}")
    sums = np.zeros(366)
    counts = np.zeros(366, dtype=int)
    for day, temp in zip(series.dates, series.temps):
        idx = day.timetuple().tm_yday - 1
        sums[idx] += temp
        counts[idx] += 1
    present = counts > 0
    means = np.divide(sums, counts, out=np.full(366, np.nan), where=present)
    if not present[365] and present[364]:
        means[365] = means[364]
        present[365] = True

    missing = np.flatnonzero(~present[:DAYS_PER_CYCLE])
    unresolved = []
    for i in missing:
        prev_i, next_i = (i - 1) % DAYS_PER_CYCLE, (i + 1) % DAYS_PER_CYCLE
        if present[prev_i] and present[next_i]:
            means[i] = 0.5 * (means[prev_i] + means[next_i])
        else:
            unresolved.append(int(i) + 1)
    if unresolved:
        shown = ", ".join(map(str, unresolved[:20]))
        more = "" if len(unresolved) <= 20 else f" (+{len(unresolved) - 20} more)"
        raise TemperatureError(f"series has no data for day(s)-of-year {shown}{more}")
    if not present[365]:
        means[365] = means[364]

    return SeasonalTemperature(means).resmooth(window_days)


def temperature_at(profile: SeasonalTemperature, t, start_day_of_year: int = 1):
    """Temperature at ``t`` days after a simulation start on ``start_day_of_year``.

    Linear interpolation between consecutive day-of-year entries, periodic
    with period 365 days.  Accepts scalars or arrays.
    """
    x = np.mod(np.asarray(t, dtype=float) + (start_day_of_year - 1), DAYS_PER_CYCLE)
    i = np.floor(x).astype(int)
    frac = x - i
    cycle = profile.day_of_year_temp[:DAYS_PER_CYCLE]
    out = cycle[i] * (1.0 - frac) + cycle[(i + 1) % DAYS_PER_CYCLE] * frac
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class RateCurve:
    """Piecewise-linear rate as a function of temperature (per day)."""

    temps: np.ndarray
    rates: np.ndarray

    def __post_init__(self):
        temps = np.atleast_1d(np.asarray(self.temps, dtype=float))
        rates = np.atleast_1d(np.asarray(self.rates, dtype=float))
        if temps.shape != rates.shape or temps.ndim != 1 or temps.size == 0:
            raise ValueError("rate curve needs matching, non-empty 1-D sample arrays")
        if np.any(np.diff(temps) <= 0):
            raise ValueError("rate curve temperature grid must be strictly increasing")
        if not (np.all(np.isfinite(temps)) and np.all(np.isfinite(rates))):
            raise ValueError("rate curve samples must be finite")
        if np.any(rates < 0):
            raise ValueError("rate curve samples must be nonnegative")
        object.__setattr__(self, "temps", temps)
        object.__setattr__(self, "rates", rates)

    @classmethod
    def from_pairs(cls, pairs) -> "RateCurve":
        arr = np.asarray(pairs, dtype=float).reshape(-1, 2)
        return cls(arr[:, 0], arr[:, 1])

    @classmethod
    def constant(cls, rate: float) -> "RateCurve":
        return cls(np.array([0.0]), np.array([float(rate)]))

    def to_pairs(self) -> list[list[float]]:
        return [[float(a), float(b)] for a, b in zip(self.temps, self.rates)]

    def scaled(self, factor: float) -> "RateCurve":
        return RateCurve(self.temps, self.rates * factor)

    def __call__(self, temp):
        return rate_at(self, temp)


def rate_at(curve: RateCurve, temp):
    """Evaluate ``curve`` at ``temp`` (scalar or array), clamped outside the grid."""
    out = np.interp(temp, curve.temps, curve.rates)
    return float(out) if np.ndim(out) == 0 else out


RATE_NAMES = (
    "dev_egg",
    "dev_larva",
    "dev_pupa",
    "dev_gonotrophic",
    "mort_egg",
    "mort_larva",
    "mort_pupa",
    "mort_adult",
    "oviposition",
    "bites_per_cycle",
    "eip_rate",
)
DEV_NAMES = RATE_NAMES[:4]


@dataclass(frozen=True)
class RateSet:
    """All temperature-dependent rates of the life-cycle and R0 models.

    Development rates (per day): egg->larva, larva->pupa, pupa->adult and
    the gonotrophic cycle.  Mortality rates per day for each stage.
    ``oviposition`` is eggs per gonotrophic cycle, ``bites_per_cycle`` the
    number of bites per cycle and ``eip_rate`` the inverse extrinsic
    incubation period.
    """

    dev_egg: RateCurve
    dev_larva: RateCurve
    dev_pupa: RateCurve
    dev_gonotrophic: RateCurve
    mort_egg: RateCurve
    mort_larva: RateCurve
    mort_pupa: RateCurve
    mort_adult: RateCurve
    oviposition: RateCurve
    bites_per_cycle: RateCurve
    eip_rate: RateCurve

    def curves(self) -> dict[str, RateCurve]:
        return {name: getattr(self, name) for name in RATE_NAMES}

    def evaluate(self, temps) -> dict[str, np.ndarray]:
        temps = np.asarray(temps, dtype=float)
        return {name: np.interp(temps, c.temps, c.rates) for name, c in self.curves().items()}

    def check_operational(self, temp_min: float, temp_max: float) -> None:
        """Raise if a development rate vanishes anywhere in ``[temp_min, temp_max]``."""
        probe = [temp_min, temp_max]
        for name in DEV_NAMES:
            c = getattr(self, name)
            probe.extend(x for x in c.temps if temp_min <= x <= temp_max)
            if np.min(np.interp(probe, c.temps, c.rates)) <= 0:
                raise ValueError(
                    f"development rate {name!r} is not positive over "
                    f"[{temp_min:.2f}, {temp_max:.2f}] C"
                )

    def replace(self, **curves: RateCurve) -> "RateSet":
        data = self.curves()
        data.update(curves)
        return RateSet(**data)


@dataclass(frozen=True)
class Environment:
    """Seasonal temperature plus rate curves, anchored to a calendar start day.

    Evaluated forcing arrays are memoised per time grid so repeated
    integrations over one grid (optimizer restarts, finite-difference
    probes) share them.
    """

    profile: SeasonalTemperature
    rates: RateSet
    start_day_of_year: int = 1
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if not 1 <= self.start_day_of_year <= 366:
            raise ValueError("start_day_of_year must lie in 1..366")

    def temperature(self, t):
        return temperature_at(self.profile, t, self.start_day_of_year)

    def forcing(self, t_start: float, dt_days: float, n_steps: int) -> "Forcing":
        key = (float(t_start), float(dt_days), int(n_steps))
        hit = self._cache.get(key)
        if hit is None:
            t_half = t_start + 0.5 * dt_days * np.arange(2 * n_steps + 1)
            temps = self.temperature(t_half)
            hit = Forcing(t_half, np.atleast_1d(temps), self.rates.evaluate(temps))
            if len(self._cache) > 32:
                self._cache.clear()
            self._cache[key] = hit
        return hit


@dataclass(frozen=True)
class Forcing:
    """Temperature and rates on the half-step grid ``t_start + k*dt/2``."""

    t_half: np.ndarray
    temps: np.ndarray
    rates: dict
