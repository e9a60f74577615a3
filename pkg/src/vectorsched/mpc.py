"""Receding-horizon (model predictive) scheduling against a simulated truth.

A "true" population, possibly with different rates or efficacies than the
planner assumes, is advanced one epoch at a time under the interventions
committed so far.  At each epoch the stage totals are observed with
multiplicative lognormal noise, the planner's state is rebuilt from those
totals with the equilibrium within-stage profile, the uncommitted timings
are re-optimized over the rolling window, and only interventions that fall
inside the next epoch are committed.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .controls import ControlSchedule, Intervention, Kind
from .lifecycle import STAGES, LifecycleState, ScenarioConfig, equilibrium_substate_profile, integrate_forward
from .optimizer import (
    NUMERICAL_FAILURES,
    OptimizationError,
    OptimizerSettings,
    descend,
    multi_start,
    project,
)
from .risk import objective

__all__ = [
    "Observation",
    "MpcSettings",
    "Mismatch",
    "EpochLog",
    "ClosedLoopResult",
    "OpenLoopResult",
    "synth_observe",
    "reinit_state",
    "mpc_run",
    "open_loop",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Observation:
    t: float
    E: float
    L: float
    P: float
    A: float

    def __post_init__(self):
        for s in STAGES:
            v = getattr(self, s)
            if not (np.isfinite(v) and v >= 0):
                raise ValueError(f"observed {s} total must be finite and nonnegative, got {v}")

    def totals(self) -> dict[str, float]:
        return {s: getattr(self, s) for s in STAGES}


def _sigmas(noise) -> dict[str, float]:
    if isinstance(noise, dict):
        unknown = set(noise) - set(STAGES)
        if unknown:
            raise ValueError(f"unknown stages in observation noise: {sorted(unknown)}")
        out = {s: float(noise.get(s, 0.0)) for s in STAGES}
    else:
        out = {s: float(noise) for s in STAGES}
    if any(v < 0 for v in out.values()):
        raise ValueError("observation noise sigma must be nonnegative")
    return out


def synth_observe(true_state: LifecycleState, noise, rng: np.random.Generator, t: float = 0.0) -> Observation:
    """Stage totals times ``exp(N(0, sigma))``; ``sigma = 0`` gives exact totals.

    ``noise`` is one sigma for every stage or a ``{stage: sigma}`` dict.
    One normal draw is taken per stage in E, L, P, A order whatever the
    sigmas, so the random stream does not depend on the noise level.
    """
    sig = _sigmas(noise)
    z = rng.standard_normal(len(STAGES))
    totals = true_state.totals()
    vals = {s: totals[s] * (np.exp(sig[s] * zi) if sig[s] > 0 else 1.0) for s, zi in zip(STAGES, z)}
    return Observation(float(t), **{s: float(max(v, 0.0)) for s, v in vals.items()})


def reinit_state(obs: Observation, temp: float, cfg: ScenarioConfig) -> LifecycleState:
    """Spread each observed total over substates by the equilibrium profile."""
    weights = equilibrium_substate_profile(temp, cfg)
    totals = obs.totals()
    parts = {}
    for s in STAGES:
        v = totals[s] * weights[s]
        # put rounding residue in the first substate so the total is kept exactly
        v[0] += totals[s] - v.sum()
        parts[s] = v
    return LifecycleState(**parts)


@dataclass(frozen=True)
class Mismatch:
    """Planner-side factors relative to the true model.

    An ``adulticide_efficacy`` of 2 means the planner believes adulticide
    is twice as effective as it really is.  ``rates`` maps rate-curve names
    to multiplicative factors.
    """

    larvicide_efficacy: float = 1.0
    adulticide_efficacy: float = 1.0
    habitat_efficacy: float = 1.0
    rates: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("larvicide_efficacy", "adulticide_efficacy", "habitat_efficacy"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} factor must be positive")
        if any(not v > 0 for v in self.rates.values()):
            raise ValueError("rate factors must be positive")

    @property
    def is_identity(self) -> bool:
        return (self.larvicide_efficacy == self.adulticide_efficacy == self.habitat_efficacy == 1.0
                and all(v == 1.0 for v in self.rates.values()))

    def planner_config(self, true_cfg: ScenarioConfig) -> ScenarioConfig:
        factor = {
            Kind.LARVICIDE: self.larvicide_efficacy,
            Kind.ADULTICIDE: self.adulticide_efficacy,
            Kind.HABITAT: self.habitat_efficacy,
        }
        ivs = []
        for iv in true_cfg.schedule:
            eff = iv.efficacy * factor[iv.kind]
            if iv.kind is Kind.HABITAT and eff >= 1:
                raise ValueError(f"habitat efficacy {eff} after mismatch is not a fraction below 1")
            ivs.append(replace(iv, efficacy=eff))
        env = true_cfg.environment
        if self.rates:
            rates = env.rates.replace(**{k: getattr(env.rates, k).scaled(v) for k, v in self.rates.items()})
            env = replace(env, rates=rates, _cache={})
        return replace(true_cfg, schedule=ControlSchedule(tuple(ivs)), environment=env)


@dataclass(frozen=True)
class MpcSettings:
    """Epoch cadence, rolling window and observation noise.

    ``horizon_days=None`` plans to the end of the season at every epoch.
    ``fresh_restarts`` random restarts are run at each epoch in addition
    to the warm start from the previous plan.
    """

    epoch_days: float = 7.0
    horizon_days: float | None = None
    obs_sigma: float | dict = 0.0
    fresh_restarts: int = 5
    seed: int = 0
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)

    def __post_init__(self):
        if not self.epoch_days > 0:
            raise ValueError("epoch_days must be positive")
        if self.horizon_days is not None and self.horizon_days < self.epoch_days:
            raise ValueError("horizon_days must be at least epoch_days")
        if self.fresh_restarts < 0:
            raise ValueError("fresh_restarts must be nonnegative")
        _sigmas(self.obs_sigma)


@dataclass
class EpochLog:
    index: int
    t: float
    observation: Observation | None
    reinit_totals: dict
    plan: list[float]
    planned_F: float
    committed: list[int]
    status: str

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "t": self.t,
            "observation": None if self.observation is None else {"t": self.observation.t, **self.observation.totals()},
            "reinit_totals": self.reinit_totals,
            "plan": self.plan,
            "planned_F": self.planned_F,
            "committed": self.committed,
            "status": self.status,
        }


@dataclass
class ClosedLoopResult:
    executed_timings: list[float]
    commit_epochs: list[int]
    realized_F: float
    epochs: list[EpochLog]

    def to_dict(self) -> dict:
        return {
            "executed_timings": self.executed_timings,
            "commit_epochs": self.commit_epochs,
            "realized_F": self.realized_F,
            "epochs": [e.to_dict() for e in self.epochs],
        }


@dataclass
class OpenLoopResult:
    timings: list[float]
    planned_F: float
    realized_F: float


def _check_inventory(true_cfg: ScenarioConfig, planner_cfg: ScenarioConfig) -> None:
    if true_cfg.J != planner_cfg.J or true_cfg.dt != planner_cfg.dt:
        raise ValueError("true and planner models must share J and dt")
    if (true_cfg.t_start, true_cfg.horizon) != (planner_cfg.t_start, planner_cfg.horizon):
        raise ValueError("true and planner models must cover the same season")
    kinds = [iv.kind for iv in true_cfg.schedule], [iv.kind for iv in planner_cfg.schedule]
    if kinds[0] != kinds[1]:
        raise ValueError("true and planner schedules must list the same interventions in the same order")


def _fixed(iv: Intervention, timing: float) -> Intervention:
    return replace(iv, timing=float(timing), free=False, bounds=None)


def _with_timings(cfg: ScenarioConfig, timings) -> ScenarioConfig:
    ivs = tuple(replace(iv, timing=float(t)) for iv, t in zip(cfg.schedule, timings))
    return cfg.with_schedule(ControlSchedule(ivs))


def _executed_config(true_cfg: ScenarioConfig, committed: dict[int, float]) -> ScenarioConfig:
    ivs = tuple(_fixed(true_cfg.schedule.interventions[i], t) for i, t in sorted(committed.items()))
    return true_cfg.with_schedule(ControlSchedule(ivs))


def _window_problem(planner_cfg: ScenarioConfig, plan: np.ndarray, committed: dict[int, float],
                    t_now: float, h_end: float, state: LifecycleState):
    """Planner config on ``[t_now, h_end]`` with the eligible timings free.

    Returns the config, the indices (into the full schedule) of its free
    interventions, and their bounds.
    """
    ivs = []
    free_idx = []
    bounds = []
    for i, iv in enumerate(planner_cfg.schedule.interventions):
        if i in committed:
            ivs.append(_fixed(iv, committed[i]))
            continue
        if not iv.free:
            ivs.append(iv)
            continue
        lo, hi = iv.default_bounds(planner_cfg.t_start, planner_cfg.t_end)
        lo, hi = max(lo, t_now), min(hi, h_end - iv.footprint)
        if lo > hi or plan[i] > h_end - iv.footprint:
            # not reachable inside this window; keep it out of the window model
            continue
        ivs.append(replace(iv, timing=float(np.clip(plan[i], lo, hi)), free=True, bounds=(lo, hi)))
        free_idx.append(i)
        bounds.append((lo, hi))
    cfg = planner_cfg.with_schedule(ControlSchedule(tuple(ivs))).window(t_now, h_end - t_now, state)
    return cfg, free_idx, np.array(bounds, dtype=float).reshape(-1, 2)


def _grid_steps(days: float, dt: float, what: str) -> int:
    n = days / dt
    if abs(n - round(n)) > 1e-6:
        raise ValueError(f"{what} ({days} d) is not a multiple of dt ({dt} d)")
    return int(round(n))


def mpc_run(true_cfg: ScenarioConfig, planner_cfg: ScenarioConfig, settings: MpcSettings = MpcSettings()) -> ClosedLoopResult:
    """Closed-loop season: observe, re-plan, commit the next epoch, advance the truth.

    The first epoch plans from the planner's own initial state; later epochs
    plan from observations.  The plan is warm-started from the timings in
    ``planner_cfg`` (the pre-season plan) and thereafter from the previous
    epoch's plan.  If the optimizer fails at an epoch the previous plan is
    kept.
    """
    _check_inventory(true_cfg, planner_cfg)
    dt = true_cfg.dt
    epoch_steps = _grid_steps(settings.epoch_days, dt, "epoch length")
    if settings.horizon_days is not None:
        _grid_steps(settings.horizon_days, dt, "planning horizon")
    n_total = true_cfg.n_steps
    obs_rng = np.random.default_rng([settings.seed, 0])

    plan = planner_cfg.schedule.timings.copy()
    free = set(planner_cfg.schedule.free_indices)
    committed: dict[int, float] = {i: float(plan[i]) for i in range(plan.size) if i not in free}
    commit_epoch: dict[int, int] = {i: -1 for i in committed}
    state = true_cfg.start_state()
    logs: list[EpochLog] = []

    k = 0
    step = 0
    while step < n_total:
        t_now = true_cfg.t_start + step * dt
        t_next = true_cfg.t_start + min(step + epoch_steps, n_total) * dt
        if k == 0:
            obs = None
            p_state = planner_cfg.start_state()
        else:
            obs = synth_observe(state, settings.obs_sigma, obs_rng, t_now)
            p_state = reinit_state(obs, planner_cfg.environment.temperature(t_now), planner_cfg)
        h_end = planner_cfg.t_end if settings.horizon_days is None else min(planner_cfg.t_end, t_now + settings.horizon_days)

        status = "no free timings"
        planned_F = float("nan")
        wcfg, idx, bounds = _window_problem(planner_cfg, plan, committed, t_now, h_end, p_state)
        if idx:
            warm = project(plan[idx], bounds)
            try:
                if settings.fresh_restarts > 0:
                    # each epoch draws its fresh restarts from its own stream
                    opt = replace(settings.optimizer, n_restarts=settings.fresh_restarts,
                                  rng_seed=settings.seed * 100_003 + k)
                    res = multi_start(wcfg, opt, extra_inits=[warm], bounds=bounds)
                    best, planned_F = np.asarray(res.best_timings), res.best_F
                else:
                    rec = descend(wcfg, warm, settings.optimizer, bounds)
                    best, planned_F = np.asarray(rec.final_timings), rec.final_F
                plan[idx] = best
                status = "ok"
            except (OptimizationError, *NUMERICAL_FAILURES) as exc:
                log.warning("epoch %d at t=%.2f: optimizer failed (%s); keeping previous plan", k, t_now, exc)
                status = f"optimizer failed: {exc}"

        newly = []
        last_epoch = step + epoch_steps >= n_total
        for i in sorted(free - set(committed)):
            if plan[i] < t_next or last_epoch:
                committed[i] = float(plan[i])
                commit_epoch[i] = k
                newly.append(i)

        logs.append(EpochLog(
            index=k,
            t=float(t_now),
            observation=obs,
            reinit_totals={s: float(v) for s, v in p_state.totals().items()},
            plan=[float(x) for x in plan],
            planned_F=float(planned_F),
            committed=newly,
            status=status,
        ))

        seg = _executed_config(true_cfg, committed).window(t_now, t_next - t_now, state)
        state = integrate_forward(seg).state(-1)
        step += epoch_steps
        k += 1

    executed = _executed_config(true_cfg, committed)
    realized_F, _ = objective(integrate_forward(executed), executed)
    order = range(len(true_cfg.schedule))
    return ClosedLoopResult(
        executed_timings=[committed[i] for i in order],
        commit_epochs=[commit_epoch[i] for i in order],
        realized_F=float(realized_F),
        epochs=logs,
    )


def open_loop(true_cfg: ScenarioConfig, planner_cfg: ScenarioConfig,
              settings: OptimizerSettings = OptimizerSettings()) -> OpenLoopResult:
    """Optimize once on the planner model and execute the plan on the truth."""
    _check_inventory(true_cfg, planner_cfg)
    res = multi_start(planner_cfg, settings)
    timings = planner_cfg.schedule.timings.copy()
    timings[planner_cfg.schedule.free_indices] = res.best_timings
    executed = _with_timings(true_cfg, timings)
    F, _ = objective(integrate_forward(executed), executed)
    return OpenLoopResult([float(x) for x in timings], float(res.best_F), float(F))
