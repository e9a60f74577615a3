"""Projected gradient descent with Armijo backtracking, plus multi-start."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .adjoint import gradient, integrate_backward
from .controls import InfeasibleCapacityError
from .lifecycle import IntegrationError, ScenarioConfig, integrate_forward
from .risk import objective

__all__ = [
    "OptimizerSettings",
    "RestartRecord",
    "OptimizationResult",
    "OptimizationError",
    "project",
    "projected_gradient",
    "canonicalize",
    "descend",
    "multi_start",
]

log = logging.getLogger(__name__)

NUMERICAL_FAILURES = (IntegrationError, InfeasibleCapacityError, FloatingPointError)


class OptimizationError(RuntimeError):
    pass


@dataclass(frozen=True)
class OptimizerSettings:
    """Descent controls.

    ``step_init``, ``max_step`` and ``min_step`` are in days: they bound
    how far the timing with the largest projected gradient moves in one
    trial step.  ``f_tol`` stops a descent once the last ``stall_window``
    accepted steps together improved the objective by less than that
    relative amount.
    """

    max_iters: int = 200
    step_init: float = 8.0
    max_step: float = 32.0
    min_step: float = 1e-3
    backtrack_factor: float = 0.5
    armijo_c: float = 1e-4
    grad_tol: float = 1e-7
    f_tol: float = 1e-6
    stall_window: int = 5
    n_restarts: int = 100
    rng_seed: int = 0

    def __post_init__(self):
        if self.max_iters < 0 or self.n_restarts < 1 or self.stall_window < 1:
            raise ValueError("max_iters must be >= 0; n_restarts and stall_window >= 1")
        if not (self.step_init > 0 and self.max_step >= self.step_init and self.min_step > 0):
            raise ValueError("need 0 < min_step, 0 < step_init <= max_step")
        if not 0 < self.backtrack_factor < 1 or not 0 < self.armijo_c < 1:
            raise ValueError("backtrack_factor and armijo_c must lie in (0, 1)")
        if self.grad_tol <= 0 or self.f_tol < 0:
            raise ValueError("grad_tol must be positive and f_tol nonnegative")


@dataclass
class RestartRecord:
    init: list[float]
    final_timings: list[float]
    final_F: float
    iters: int
    converged: bool
    stop_reason: str
    trace: list[float] = field(default_factory=list)

    def to_dict(self, with_trace: bool = False) -> dict:
        d = asdict(self)
        if not with_trace:
            d.pop("trace")
        return d


@dataclass
class OptimizationResult:
    best_timings: list[float]
    best_F: float
    records: list[RestartRecord]
    trace: list[float]

    @property
    def best_index(self) -> int:
        return int(np.argmin([r.final_F for r in self.records]))

    def to_dict(self) -> dict:
        return {
            "best_timings": self.best_timings,
            "best_F": self.best_F,
            "best_restart": self.best_index,
            "trace": self.trace,
            "restarts": [r.to_dict() for r in self.records],
        }


def project(timings, bounds) -> np.ndarray:
    bounds = np.asarray(bounds, dtype=float).reshape(-1, 2)
    return np.clip(np.asarray(timings, dtype=float), bounds[:, 0], bounds[:, 1])


def projected_gradient(timings, g, bounds) -> np.ndarray:
    """Gradient with components that push against an active bound zeroed."""
    bounds = np.asarray(bounds, dtype=float).reshape(-1, 2)
    g = np.asarray(g, dtype=float).copy()
    at_lo = (timings <= bounds[:, 0]) & (g > 0)
    at_hi = (timings >= bounds[:, 1]) & (g < 0)
    g[at_lo | at_hi] = 0.0
    return g


def canonicalize(cfg: ScenarioConfig, timings) -> np.ndarray:
    """Sort timings within groups of interchangeable interventions."""
    timings = np.asarray(timings, dtype=float).copy()
    free = cfg.schedule.free_indices
    groups: dict[tuple, list[int]] = {}
    for k, i in enumerate(free):
        groups.setdefault(cfg.schedule.interventions[i].signature(), []).append(k)
    for ks in groups.values():
        timings[ks] = np.sort(timings[ks])
    return timings


def _forward(cfg: ScenarioConfig, p):
    probe = cfg.with_free_timings(p)
    traj = integrate_forward(probe)
    return objective(traj, probe)[0], traj, probe


def descend(cfg: ScenarioConfig, init_timings, settings: OptimizerSettings = OptimizerSettings(),
            bounds=None) -> RestartRecord:
    """Projected gradient descent from ``init_timings``.

    The trial step length comes from the Barzilai-Borwein quotient of the
    last two iterates (capped so no timing moves more than ``max_step``
    days) and is backtracked until the Armijo condition holds, so the
    recorded objective trace never increases.  A trial point whose forward
    solve fails counts as a rejected step.
    """
    bounds = cfg.timing_bounds() if bounds is None else np.asarray(bounds, dtype=float).reshape(-1, 2)
    p = project(init_timings, bounds)
    F, traj, probe = _forward(cfg, p)
    g = gradient(traj, integrate_backward(traj, probe), probe)
    trace = [F]
    reason = "max_iters"
    converged = False
    alpha = None
    it = 0
    while it < settings.max_iters:
        pg = projected_gradient(p, g, bounds)
        gmax = np.max(np.abs(pg), initial=0.0)
        if gmax < settings.grad_tol:
            reason, converged = "grad_tol", True
            break
        if alpha is None:
            alpha = settings.step_init / gmax
        alpha = min(alpha, settings.max_step / gmax)
        accepted = False
        while alpha * gmax >= settings.min_step:
            trial = project(p - alpha * pg, bounds)
            d = trial - p
            try:
                F_trial, traj_trial, probe_trial = _forward(cfg, trial)
            except NUMERICAL_FAILURES as exc:
                log.debug("trial point rejected: %s", exc)
                F_trial = np.inf
            if F_trial <= F + settings.armijo_c * float(g @ d):
                accepted = True
                break
            alpha *= settings.backtrack_factor
        if not accepted:
            reason = "step_underflow"
            break
        it += 1
        g_new = gradient(traj_trial, integrate_backward(traj_trial, probe_trial), probe_trial)
        s_vec, y_vec = trial - p, g_new - g
        sy = float(s_vec @ y_vec)
        alpha = float(s_vec @ s_vec) / sy if sy > 0 else 2.0 * alpha
        p, F, g = trial, F_trial, g_new
        trace.append(F)
        if len(trace) > settings.stall_window and trace[-1 - settings.stall_window] - F <= settings.f_tol * abs(F):
            reason, converged = "f_tol", True
            break
    return RestartRecord(
        init=[float(x) for x in np.asarray(init_timings, dtype=float)],
        final_timings=[float(x) for x in canonicalize(cfg, p)],
        final_F=float(F),
        iters=it,
        converged=converged,
        stop_reason=reason,
        trace=[float(x) for x in trace],
    )


def random_inits(bounds, n: int, seed: int, start_index: int = 0) -> list[np.ndarray]:
    """Uniform draws inside ``bounds``; draw ``i`` uses the stream ``(seed, i)``."""
    bounds = np.asarray(bounds, dtype=float).reshape(-1, 2)
    out = []
    for i in range(start_index, start_index + n):
        rng = np.random.default_rng([seed, i])
        out.append(bounds[:, 0] + (bounds[:, 1] - bounds[:, 0]) * rng.random(len(bounds)))
    return out


def multi_start(cfg: ScenarioConfig, settings: OptimizerSettings = OptimizerSettings(),
                extra_inits=(), bounds=None) -> OptimizationResult:
    """Best of ``n_restarts`` seeded descents (plus any ``extra_inits``, tried first)."""
    bounds = cfg.timing_bounds() if bounds is None else np.asarray(bounds, dtype=float).reshape(-1, 2)
    inits = [np.asarray(x, dtype=float) for x in extra_inits]
    inits += random_inits(bounds, settings.n_restarts, settings.rng_seed)
    records = []
    errors = []
    for i, init in enumerate(inits):
        try:
            records.append(descend(cfg, init, settings, bounds))
        except NUMERICAL_FAILURES as exc:
            errors.append(f"restart {i}: {exc}")
            records.append(RestartRecord([float(x) for x in init], [float(x) for x in init],
                                         float("inf"), 0, False, f"failed: {exc}"))
    finite = [r for r in records if np.isfinite(r.final_F)]
    if not finite:
        raise OptimizationError("all restarts failed:\n" + "\n".join(errors))
    best = min(finite, key=lambda r: r.final_F)
    return OptimizationResult(list(best.final_timings), best.final_F, records, list(best.trace))
