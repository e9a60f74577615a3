"""Intervention profiles and their derivatives with respect to timing.

Larvicide and adulticide act as additive mortality pulses shaped as the
product of a rising and a falling logistic edge.  Habitat elimination
removes a fraction of the breeding sites at its onset; the sites then
reappear with an exponential recovery.  Every profile is C1 in both time
and timing, which the adjoint gradient requires.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit

__all__ = [
    "Kind",
    "Intervention",
    "ControlSchedule",
    "CarryingCapacityModel",
    "InfeasibleCapacityError",
    "smooth_pulse",
    "pulse_timing_derivative",
    "induced_mortality",
    "induced_mortality_derivative",
    "induced_mortality_on_grid",
    "pulse_derivative_on_grid",
    "habitat_delta",
    "habitat_timing_derivative",
    "carrying_capacity",
]

DEFAULT_SHARPNESS = 12.0  # 1/day, edges of roughly two hours


class Kind(str, enum.Enum):
    LARVICIDE = "larvicide"
    ADULTICIDE = "adulticide"
    HABITAT = "habitat_elimination"

    @property
    def is_pulse(self) -> bool:
        return self is not Kind.HABITAT


@dataclass(frozen=True)
class Intervention:
    """One control action.

    ``efficacy`` is an induced mortality rate (per day) for the pulse kinds
    and the eliminated fraction of breeding sites for habitat elimination.
    ``bounds`` is the admissible timing window; ``None`` means "derive from
    the simulation horizon".
    """

    kind: Kind
    timing: float
    efficacy: float
    duration: float | None = None
    recovery_time: float | None = None
    sharpness: float = DEFAULT_SHARPNESS
    free: bool = True
    bounds: tuple[float, float] | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "timing", float(self.timing))
        if self.efficacy < 0:
            raise ValueError(f"{self.kind.value}: efficacy must be nonnegative")
        if self.sharpness <= 0:
            raise ValueError(f"{self.kind.value}: edge sharpness must be positive")
        if self.kind.is_pulse:
            if self.duration is None or self.duration <= 0:
                raise ValueError(f"{self.kind.value}: duration must be positive")
        else:
            if not 0 <= self.efficacy < 1:
                raise ValueError("habitat_elimination: efficacy is a fraction in [0, 1)")
            if self.recovery_time is None or self.recovery_time <= 0:
                raise ValueError("habitat_elimination: recovery_time must be positive")
        if self.bounds is not None:
            lo, hi = self.bounds
            if not lo <= hi:
                raise ValueError(f"{self.kind.value}: empty timing bounds {self.bounds}")
            object.__setattr__(self, "bounds", (float(lo), float(hi)))

    @property
    def footprint(self) -> float:
        """Days after the timing over which the intervention is considered active."""
        return self.duration if self.kind.is_pulse else 0.0

    def default_bounds(self, t_start: float, t_end: float) -> tuple[float, float]:
        if self.bounds is not None:
            return self.bounds
        return (t_start, max(t_start, t_end - self.footprint))

    def signature(self) -> tuple:
        """Everything but the timing; equal signatures are interchangeable."""
        return (self.kind, self.efficacy, self.duration, self.recovery_time, self.sharpness, self.bounds)


@dataclass(frozen=True)
class ControlSchedule:
    interventions: tuple[Intervention, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "interventions", tuple(self.interventions))

    def __len__(self) -> int:
        return len(self.interventions)

    def __iter__(self):
        return iter(self.interventions)

    @property
    def free_indices(self) -> list[int]:
        return [i for i, iv in enumerate(self.interventions) if iv.free]

    @property
    def timings(self) -> np.ndarray:
        return np.array([iv.timing for iv in self.interventions], dtype=float)

    def free_timings(self) -> np.ndarray:
        return self.timings[self.free_indices]

    def with_free_timings(self, values) -> "ControlSchedule":
        values = np.asarray(values, dtype=float).ravel()
        idx = self.free_indices
        if values.size != len(idx):
            raise ValueError(f"expected {len(idx)} free timings, got {values.size}")
        ivs = list(self.interventions)
        for i, v in zip(idx, values):
            ivs[i] = replace(ivs[i], timing=float(v))
        return ControlSchedule(tuple(ivs))

    def bounds(self, t_start: float, t_end: float) -> np.ndarray:
        """``(n_free, 2)`` array of timing bounds for the free interventions."""
        rows = [self.interventions[i].default_bounds(t_start, t_end) for i in self.free_indices]
        return np.array(rows, dtype=float).reshape(-1, 2)

    def of_kind(self, kind: Kind) -> list[Intervention]:
        return [iv for iv in self.interventions if iv.kind is Kind(kind)]

    def validate_timings(self, t_start: float, t_end: float) -> None:
        for i, iv in enumerate(self.interventions):
            lo, hi = iv.default_bounds(t_start, t_end)
            if iv.free and not lo - 1e-9 <= iv.timing <= hi + 1e-9:
                raise ValueError(
                    f"intervention {i} ({iv.kind.value}) timing {iv.timing} outside bounds [{lo}, {hi}]"
                )


def _log_sigmoid(u):
    return -np.logaddexp(0.0, -u)


def smooth_pulse(t, p, duration, sharpness=DEFAULT_SHARPNESS):
    """Rectangle-like pulse on ``[p, p + duration]`` with logistic edges.

    ``s(k(t-p)) * s(k(p+duration-t))`` with ``s`` the logistic function.
    """
    t = np.asarray(t, dtype=float)
    out = expit(sharpness * (t - p)) * expit(sharpness * (p + duration - t))
    return float(out) if out.ndim == 0 else out


def pulse_timing_derivative(t, p, duration, sharpness=DEFAULT_SHARPNESS):
    """Exact derivative of :func:`smooth_pulse` with respect to ``p``."""
    t = np.asarray(t, dtype=float)
    rise = expit(sharpness * (t - p))
    fall = expit(sharpness * (p + duration - t))
    out = sharpness * rise * fall * (rise - fall)
    return float(out) if out.ndim == 0 else out


def induced_mortality(schedule: ControlSchedule, kind: Kind, t):
    """Summed efficacy-weighted pulses of one kind (per day)."""
    kind = Kind(kind)
    if not kind.is_pulse:
        raise ValueError("induced mortality is defined for larvicide and adulticide only")
    t = np.asarray(t, dtype=float)
    total = np.zeros_like(t)
    for iv in schedule.of_kind(kind):
        total = total + iv.efficacy * smooth_pulse(t, iv.timing, iv.duration, iv.sharpness)
    return float(total) if total.ndim == 0 else total


def induced_mortality_derivative(iv: Intervention, t):
    """d/dp of one pulse intervention's contribution to induced mortality."""
    return iv.efficacy * pulse_timing_derivative(t, iv.timing, iv.duration, iv.sharpness)


# logistic tails below exp(-40) are dropped when evaluating on sorted grids
_TAIL = 40.0


def _support(t: np.ndarray, lo: float, hi: float) -> slice:
    i0, i1 = np.searchsorted(t, (lo, hi))
    return slice(int(i0), int(i1))


def induced_mortality_on_grid(schedule: ControlSchedule, kind: Kind, t: np.ndarray) -> np.ndarray:
    """:func:`induced_mortality` on a sorted grid, skipping each pulse's flat tails."""
    t = np.asarray(t, dtype=float)
    total = np.zeros_like(t)
    for iv in schedule.of_kind(Kind(kind)):
        w = _support(t, iv.timing - _TAIL / iv.sharpness, iv.timing + iv.duration + _TAIL / iv.sharpness)
        total[w] += iv.efficacy * smooth_pulse(t[w], iv.timing, iv.duration, iv.sharpness)
    return total


def pulse_derivative_on_grid(iv: Intervention, t: np.ndarray) -> np.ndarray:
    """:func:`induced_mortality_derivative` on a sorted grid (zero on the flat tails)."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    w = _support(t, iv.timing - _TAIL / iv.sharpness, iv.timing + iv.duration + _TAIL / iv.sharpness)
    out[w] = induced_mortality_derivative(iv, t[w])
    return out


def habitat_delta(iv: Intervention, c0: float, t):
    """Breeding sites removed by ``iv`` at time ``t`` (capacity units).

    ``efficacy * c0 * exp(-(t-p)/recovery_time)`` switched on by a logistic
    onset at ``p``; evaluated in log space so early times do not overflow.
    """
    t = np.asarray(t, dtype=float)
    u = t - iv.timing
    out = iv.efficacy * c0 * np.exp(-u / iv.recovery_time + _log_sigmoid(iv.sharpness * u))
    return float(out) if out.ndim == 0 else out


def habitat_timing_derivative(iv: Intervention, c0: float, t):
    """Exact d/dp of :func:`habitat_delta`."""
    t = np.asarray(t, dtype=float)
    u = t - iv.timing
    onset = expit(iv.sharpness * u)
    out = habitat_delta(iv, c0, t) * (1.0 / iv.recovery_time - iv.sharpness * (1.0 - onset))
    return float(out) if np.ndim(out) == 0 else out


class InfeasibleCapacityError(ValueError):
    def __init__(self, t: float, value: float, floor: float):
        super().__init__(f"carrying capacity {value:.6g} at t={t:.4f} d is at or below the floor {floor:.6g}")
        self.t = t


@dataclass(frozen=True)
class CarryingCapacityModel:
    """``C(t) = (c0 - sum_i delta_i(t)) * alpha(t)``.

    ``alpha`` is a constant or a ``(times, values)`` pair interpolated
    linearly in time (held constant outside the given range).
    """

    c0: float
    alpha: float | tuple = 1.0
    habitat_interventions: tuple[Intervention, ...] = ()
    floor_fraction: float = 1e-6

    def __post_init__(self):
        if self.c0 <= 0:
            raise ValueError("c0 must be positive")
        if not 0 < self.floor_fraction < 1:
            raise ValueError("capacity floor fraction must lie in (0, 1)")
        if not np.isscalar(self.alpha):
            times, values = (np.asarray(a, dtype=float) for a in self.alpha)
            if times.shape != values.shape or np.any(np.diff(times) <= 0) or np.any(values < 0):
                raise ValueError("alpha series needs increasing times and nonnegative values")
            object.__setattr__(self, "alpha", (times, values))
        elif self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        object.__setattr__(self, "habitat_interventions", tuple(self.habitat_interventions))

    @property
    def floor(self) -> float:
        return self.floor_fraction * self.c0

    def alpha_at(self, t):
        t = np.asarray(t, dtype=float)
        if np.isscalar(self.alpha):
            out = np.full_like(t, float(self.alpha))
        else:
            out = np.interp(t, *self.alpha)
        return float(out) if out.ndim == 0 else out

    def with_interventions(self, schedule: ControlSchedule) -> "CarryingCapacityModel":
        return replace(self, habitat_interventions=tuple(schedule.of_kind(Kind.HABITAT)))


def carrying_capacity(model: CarryingCapacityModel, t):
    """Composed carrying capacity; raises if it reaches the floor anywhere in ``t``."""
    t = np.asarray(t, dtype=float)
    sites = np.full_like(t, model.c0)
    for iv in model.habitat_interventions:
        sites = sites - habitat_delta(iv, model.c0, t)
    cap = sites * model.alpha_at(t)
    low = np.atleast_1d(cap <= model.floor)
    if low.any():
        i = int(np.argmax(low))
        raise InfeasibleCapacityError(float(np.atleast_1d(t)[i]), float(np.atleast_1d(cap)[i]), model.floor)
    return float(cap) if cap.ndim == 0 else cap
