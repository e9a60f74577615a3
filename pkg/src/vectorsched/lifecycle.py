"""Stage-structured Aedes life-cycle model with J sequential substates per stage.

Each stage (egg, larva, pupa, adult) is a chain of ``J`` substates; moving
along the chain at rate ``J * gamma`` gives Erlang-distributed stage
durations with mean ``1/gamma``.  Hatching is throttled by the
density-dependent factor ``f1 = 1 - sum(L)/C``; half of the emerging pupae
are female.  Adults cycle through the gonotrophic chain and lay ``ov``
eggs each time they complete it.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .controls import (
    CarryingCapacityModel,
    ControlSchedule,
    Kind,
    carrying_capacity,
    induced_mortality,
    induced_mortality_on_grid,
)
from .environment import Environment
from .risk import EpidemiologicalParams

__all__ = [
    "IntegrationError",
    "LifecycleState",
    "ScenarioConfig",
    "Trajectory",
    "f1",
    "rhs",
    "integrate_forward",
    "equilibrium_substate_profile",
    "STAGES",
]

STAGES = ("E", "L", "P", "A")
_STAGE_RATES = {
    "E": ("dev_egg", "mort_egg"),
    "L": ("dev_larva", "mort_larva"),
    "P": ("dev_pupa", "mort_pupa"),
    "A": ("dev_gonotrophic", "mort_adult"),
}
_KERNEL_ROWS = (
    "dev_egg",
    "dev_larva",
    "dev_pupa",
    "dev_gonotrophic",
    "mort_egg",
    "mort_larva",
    "mort_pupa",
    "mort_adult",
    "oviposition",
)


class IntegrationError(RuntimeError):
    def __init__(self, message: str, t: float):
        super().__init__(f"{message} at t={t:.4f} d")
        self.t = t


@dataclass(frozen=True)
class LifecycleState:
    E: np.ndarray
    L: np.ndarray
    P: np.ndarray
    A: np.ndarray

    def __post_init__(self):
        arrays = [np.atleast_1d(np.asarray(getattr(self, s), dtype=float)).copy() for s in STAGES]
        if len({a.shape for a in arrays}) != 1 or arrays[0].ndim != 1:
            raise ValueError("all stages need the same number of substates")
        for s, a in zip(STAGES, arrays):
            a.setflags(write=False)
            object.__setattr__(self, s, a)

    @property
    def J(self) -> int:
        return self.E.size

    @classmethod
    def zeros(cls, J: int) -> "LifecycleState":
        z = np.zeros(J)
        return cls(z, z, z, z)

    @classmethod
    def from_vector(cls, y, J: int) -> "LifecycleState":
        y = np.asarray(y, dtype=float)
        return cls(y[:J], y[J:2 * J], y[2 * J:3 * J], y[3 * J:4 * J])

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.E, self.L, self.P, self.A])

    def totals(self) -> dict[str, float]:
        return {s: float(getattr(self, s).sum()) for s in STAGES}


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed for one forward (and adjoint) run.

    Times are days since the season start; the run covers
    ``[t_start, t_start + horizon]`` on a uniform grid of step ``dt``.
    """

    environment: Environment
    capacity: CarryingCapacityModel
    epi: EpidemiologicalParams
    schedule: ControlSchedule = field(default_factory=ControlSchedule)
    substates: int = 16
    horizon: float = 365.0
    dt: float = 0.05
    t_start: float = 0.0
    initial_state: LifecycleState | None = None
    recruitment_clamp: bool = True
    clamp_scale: float = 50.0

    def __post_init__(self):
        if self.substates < 1:
            raise ValueError("substates J must be >= 1")
        if not 0 < self.dt <= 0.5:
            raise ValueError("dt must lie in (0, 0.5] days")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        ratio = self.horizon / self.dt
        if abs(ratio - round(ratio)) > 1e-6:
            raise ValueError(f"horizon {self.horizon} is not a multiple of dt {self.dt}")
        if self.clamp_scale <= 0:
            raise ValueError("clamp_scale must be positive")
        if self.initial_state is not None and self.initial_state.J != self.substates:
            raise ValueError("initial state has the wrong number of substates")

    @property
    def J(self) -> int:
        return self.substates

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))

    @property
    def t_end(self) -> float:
        return self.t_start + self.horizon

    @property
    def times(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.n_steps + 1)

    @property
    def rates(self):
        return self.environment.rates

    def start_state(self) -> LifecycleState:
        if self.initial_state is not None:
            return self.initial_state
        E = np.zeros(self.J)
        E[0] = 0.1 * self.capacity.c0
        z = np.zeros(self.J)
        return LifecycleState(E, z, z, z)

    def timing_bounds(self) -> np.ndarray:
        return self.schedule.bounds(self.t_start, self.t_end)

    def with_free_timings(self, values) -> "ScenarioConfig":
        return replace(self, schedule=self.schedule.with_free_timings(values))

    def with_schedule(self, schedule: ControlSchedule) -> "ScenarioConfig":
        return replace(self, schedule=schedule)

    def window(self, t_start: float, horizon: float, initial_state: LifecycleState) -> "ScenarioConfig":
        """Same model restarted from ``initial_state`` at ``t_start``."""
        return replace(self, t_start=float(t_start), horizon=float(horizon), initial_state=initial_state)

    def forcing(self):
        return self.environment.forcing(self.t_start, self.dt, self.n_steps)

    def kernel_rates(self) -> np.ndarray:
        fc = self.forcing()
        return np.ascontiguousarray(np.vstack([fc.rates[name] for name in _KERNEL_ROWS]))

    def control_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Larvicide mortality, adulticide mortality and capacity on the half grid."""
        t_half = self.forcing().t_half
        rl = induced_mortality_on_grid(self.schedule, Kind.LARVICIDE, t_half)
        ra = induced_mortality_on_grid(self.schedule, Kind.ADULTICIDE, t_half)
        cap = np.atleast_1d(carrying_capacity(self.capacity.with_interventions(self.schedule), t_half))
        return rl, ra, cap

    def fingerprint(self) -> str:
        """Digest of grid and schedule; forward and adjoint runs must agree on it."""
        h = hashlib.sha1()
        h.update(repr((self.J, self.t_start, self.dt, self.n_steps, self.recruitment_clamp,
                       self.clamp_scale, self.schedule, self.capacity.c0)).encode())
        h.update(self.start_state().to_vector().tobytes())
        return h.hexdigest()


@dataclass(frozen=True)
class Trajectory:
    """Forward solution stored at every grid point, with grid derivatives."""

    times: np.ndarray
    states: np.ndarray
    derivatives: np.ndarray
    J: int
    fingerprint: str

    def _block(self, stage: str) -> np.ndarray:
        i = STAGES.index(stage)
        return self.states[:, i * self.J:(i + 1) * self.J]

    @property
    def E(self) -> np.ndarray:
        return self._block("E")

    @property
    def L(self) -> np.ndarray:
        return self._block("L")

    @property
    def P(self) -> np.ndarray:
        return self._block("P")

    @property
    def A(self) -> np.ndarray:
        return self._block("A")

    def totals(self) -> dict[str, np.ndarray]:
        return {s: self._block(s).sum(axis=1) for s in STAGES}

    @property
    def A_total(self) -> np.ndarray:
        return self.A.sum(axis=1)

    @property
    def L_total(self) -> np.ndarray:
        return self.L.sum(axis=1)

    def state(self, n: int = -1) -> LifecycleState:
        return LifecycleState.from_vector(self.states[n], self.J)

    def index_of(self, t: float) -> int:
        dt = self.times[1] - self.times[0]
        n = int(round((t - self.times[0]) / dt))
        if not 0 <= n < self.times.size or abs(self.times[n] - t) > 1e-6 * max(1.0, dt):
            raise ValueError(f"t={t} is not on the trajectory grid")
        return n


def f1(total_larvae, C, clamp: bool = False, scale: float = 50.0):
    """Density-dependent hatching factor ``1 - total_larvae/C``.

    With ``clamp`` the factor goes through ``softplus(scale*x)/scale``, a
    C-infinity version of ``max(x, 0)`` that keeps recruitment nonnegative.
    """
    C = np.asarray(C, dtype=float)
    if np.any(C <= 0):
        raise ValueError("carrying capacity must be positive")
    x = 1.0 - np.asarray(total_larvae, dtype=float) / C
    out = np.logaddexp(0.0, scale * x) / scale if clamp else x
    return float(out) if np.ndim(out) == 0 else out


def rhs(state: LifecycleState, t: float, cfg: ScenarioConfig) -> LifecycleState:
    """Time derivative of the state at time ``t`` (reference, un-compiled)."""
    J = cfg.J
    y = state.to_vector()
    if not np.all(np.isfinite(y)):
        raise IntegrationError("non-finite state", t)
    temp = cfg.environment.temperature(t)
    r = {k: float(v) for k, v in cfg.rates.evaluate(temp).items()}
    rl = induced_mortality(cfg.schedule, Kind.LARVICIDE, t)
    ra = induced_mortality(cfg.schedule, Kind.ADULTICIDE, t)
    C = carrying_capacity(cfg.capacity.with_interventions(cfg.schedule), t)
    E, L, P, A = state.E, state.L, state.P, state.A

    def chain(x, rate, loss, inflow):
        d = -(J * rate + loss) * x
        d[1:] += J * rate * x[:-1]
        d[0] += inflow
        return d

    hatch = f1(L.sum(), C, cfg.recruitment_clamp, cfg.clamp_scale)
    dE = chain(E, r["dev_egg"], r["mort_egg"], J * r["oviposition"] * r["dev_gonotrophic"] * A[-1])
    dL = chain(L, r["dev_larva"], r["mort_larva"] + rl, J * hatch * r["dev_egg"] * E[-1])
    dP = chain(P, r["dev_pupa"], r["mort_pupa"], J * r["dev_larva"] * L[-1])
    dA = chain(A, r["dev_gonotrophic"], r["mort_adult"] + ra,
               J * (0.5 * r["dev_pupa"] * P[-1] + r["dev_gonotrophic"] * A[-1]))
    return LifecycleState(dE, dL, dP, dA)


def integrate_forward(cfg: ScenarioConfig) -> Trajectory:
    """Classical RK4 on the uniform grid, storing every state."""
    rl, ra, cap = cfg.control_arrays()
    y0 = cfg.start_state().to_vector()
    if not np.all(np.isfinite(y0)):
        raise IntegrationError("non-finite initial state", cfg.t_start)
    ys, fs, failed = _kernels.forward_rk4(
        y0, cfg.J, cfg.dt, cfg.n_steps, cfg.kernel_rates(), rl, ra, cap,
        cfg.recruitment_clamp, cfg.clamp_scale,
    )
    if failed >= 0:
        raise IntegrationError("forward integration produced a non-finite state", cfg.t_start + (failed + 1) * cfg.dt)
    return Trajectory(cfg.times, ys, fs, cfg.J, cfg.fingerprint())


def equilibrium_substate_profile(temp: float, cfg: ScenarioConfig) -> dict[str, np.ndarray]:
    """Stationary within-stage distribution at a frozen temperature.

    With inflow into substate 1 only, the balance of a chain with
    development rate ``gamma`` and mortality ``mu`` gives occupancies
    proportional to ``rho**(j-1)`` where ``rho = J*gamma / (J*gamma + mu)``.
    """
    J = cfg.J
    r = cfg.rates.evaluate(temp)
    out = {}
    for stage, (dev, mort) in _STAGE_RATES.items():
        gamma, mu = float(r[dev]), float(r[mort])
        if not gamma > 0 or not math.isfinite(gamma):
            raise ValueError(f"degenerate substate profile: {dev} is {gamma} at {temp} C")
        rho = J * gamma / (J * gamma + mu)
        w = rho ** np.arange(J)
        out[stage] = w / w.sum()
    return out
