"""Adjoint sensitivities of cumulative risk with respect to intervention timings.

Sign convention: the state equation is written ``h = dx/dt - f(x, p, t) = 0``,
so the adjoint obeys ``dlam/dt = -(df/dx)^T lam + dR0/dx`` backward from
``lam(T) = 0`` and ``dF/dp = -integral lam^T df/dp dt``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from . import _kernels
from .controls import (
    Kind,
    carrying_capacity,
    habitat_timing_derivative,
    induced_mortality,
    pulse_derivative_on_grid,
)
from .lifecycle import STAGES, IntegrationError, ScenarioConfig, Trajectory, f1, integrate_forward
from .risk import d_r0_dA, objective, source_on_half_grid

__all__ = [
    "ConsistencyError",
    "AdjointTrajectory",
    "adjoint_rhs",
    "integrate_backward",
    "gradient",
    "finite_difference_gradient",
    "value_and_gradient",
]


class ConsistencyError(ValueError):
    """Forward trajectory and scenario (grid or schedule) do not match."""


@dataclass(frozen=True)
class AdjointTrajectory:
    times: np.ndarray
    lams: np.ndarray
    J: int
    fingerprint: str

    def _block(self, stage: str) -> np.ndarray:
        i = STAGES.index(stage)
        return self.lams[:, i * self.J:(i + 1) * self.J]

    @property
    def lam_E(self):
        return self._block("E")

    @property
    def lam_L(self):
        return self._block("L")

    @property
    def lam_P(self):
        return self._block("P")

    @property
    def lam_A(self):
        return self._block("A")


def _check(traj: Trajectory, cfg: ScenarioConfig) -> None:
    if traj.fingerprint != cfg.fingerprint():
        raise ConsistencyError("trajectory was computed for a different grid or control schedule")


def _hermite(traj: Trajectory, t: float) -> np.ndarray:
    dt = traj.times[1] - traj.times[0]
    x = (t - traj.times[0]) / dt
    n = int(np.clip(np.floor(x), 0, traj.times.size - 2))
    s = x - n
    y0, y1 = traj.states[n], traj.states[n + 1]
    f0, f1_ = traj.derivatives[n] * dt, traj.derivatives[n + 1] * dt
    h00 = 2 * s**3 - 3 * s**2 + 1
    h10 = s**3 - 2 * s**2 + s
    h01 = -2 * s**3 + 3 * s**2
    h11 = s**3 - s**2
    return h00 * y0 + h10 * f0 + h01 * y1 + h11 * f1_


def adjoint_rhs(lam: np.ndarray, t: float, traj: Trajectory, cfg: ScenarioConfig) -> np.ndarray:
    """Reference evaluation of the adjoint right-hand side at arbitrary ``t``.

    Written stage by stage; the compiled backward pass must agree with it.
    """
    _check(traj, cfg)
    J = cfg.J
    x = _hermite(traj, t)
    E, L = x[:J], x[J:2 * J]
    lE, lL, lP, lA = (lam[i * J:(i + 1) * J] for i in range(4))
    r = {k: float(v) for k, v in cfg.rates.evaluate(cfg.environment.temperature(t)).items()}
    rl = induced_mortality(cfg.schedule, Kind.LARVICIDE, t)
    ra = induced_mortality(cfg.schedule, Kind.ADULTICIDE, t)
    C = carrying_capacity(cfg.capacity.with_interventions(cfg.schedule), t)
    gel, glp, gpa, gae = r["dev_egg"], r["dev_larva"], r["dev_pupa"], r["dev_gonotrophic"]

    S = L.sum()
    hatch = f1(S, C, cfg.recruitment_clamp, cfg.clamp_scale)
    slope = expit(cfg.clamp_scale * (1 - S / C)) if cfg.recruitment_clamp else 1.0
    df1_dL = -slope / C

    def shift(v):
        # v_{j+1}, zero past the end
        return np.append(v[1:], 0.0)

    dL = (J * glp + r["mort_larva"] + rl) * lL - J * glp * shift(lL) - df1_dL * J * gel * E[-1] * lL[0]
    dL[-1] -= J * glp * lP[0]
    dP = (J * gpa + r["mort_pupa"]) * lP - J * gpa * shift(lP)
    dP[-1] -= 0.5 * J * gpa * lA[0]
    dA = (J * gae + r["mort_adult"] + ra) * lA - J * gae * shift(lA)
    dA[-1] -= J * gae * (lA[0] + r["oviposition"] * lE[0])
    dA = dA + float(d_r0_dA(t, cfg.epi, cfg.environment))
    dE = (J * gel + r["mort_egg"]) * lE - J * gel * shift(lE)
    dE[-1] -= hatch * J * gel * lL[0]
    return np.concatenate([dE, dL, dP, dA])


def integrate_backward(traj: Trajectory, cfg: ScenarioConfig) -> AdjointTrajectory:
    """RK4 from ``lam(T) = 0`` back to the start of the run, on the forward grid."""
    _check(traj, cfg)
    rl, ra, cap = cfg.control_arrays()
    lams, failed = _kernels.backward_rk4(
        traj.states, traj.derivatives, cfg.J, cfg.dt, cfg.kernel_rates(), rl, ra, cap,
        cfg.recruitment_clamp, cfg.clamp_scale, source_on_half_grid(cfg),
    )
    if failed >= 0:
        raise IntegrationError("adjoint integration produced a non-finite value", float(traj.times[failed]))
    return AdjointTrajectory(traj.times, lams, cfg.J, traj.fingerprint)


def gradient(traj: Trajectory, adj: AdjointTrajectory, cfg: ScenarioConfig) -> np.ndarray:
    """dF/dp for every free timing, in schedule order (trapezoidal quadrature)."""
    _check(traj, cfg)
    if adj.fingerprint != traj.fingerprint:
        raise ConsistencyError("adjoint and forward trajectories come from different runs")
    t = traj.times
    J = cfg.J
    ivs = cfg.schedule.interventions
    out = np.zeros(len(cfg.schedule.free_indices))

    habitat_factor = None
    if any(ivs[i].kind is Kind.HABITAT for i in cfg.schedule.free_indices):
        cap = cfg.control_arrays()[2][::2]
        S = traj.L_total
        slope = expit(cfg.clamp_scale * (1 - S / cap)) if cfg.recruitment_clamp else 1.0
        df1_dC = slope * S / cap**2
        gel = cfg.forcing().rates["dev_egg"][::2]
        alpha = cfg.capacity.alpha_at(t)
        habitat_factor = adj.lam_L[:, 0] * traj.E[:, J - 1] * df1_dC * alpha * J * gel

    lamL_L = np.einsum("ij,ij->i", adj.lam_L, traj.L)
    lamA_A = np.einsum("ij,ij->i", adj.lam_A, traj.A)
    for out_i, i in enumerate(cfg.schedule.free_indices):
        iv = ivs[i]
        if iv.kind is Kind.LARVICIDE:
            integrand = lamL_L * pulse_derivative_on_grid(iv, t)
        elif iv.kind is Kind.ADULTICIDE:
            integrand = lamA_A * pulse_derivative_on_grid(iv, t)
        else:
            integrand = habitat_factor * habitat_timing_derivative(iv, cfg.capacity.c0, t)
        out[out_i] = np.trapezoid(integrand, t)
    return out


def value_and_gradient(cfg: ScenarioConfig) -> tuple[float, np.ndarray]:
    """Objective and its adjoint gradient for the scenario's current timings."""
    traj = integrate_forward(cfg)
    F, _ = objective(traj, cfg)
    adj = integrate_backward(traj, cfg)
    return F, gradient(traj, adj, cfg)


def finite_difference_gradient(cfg: ScenarioConfig, eps: float = 0.01) -> np.ndarray:
    """Central differences of the objective, two forward solves per free timing."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    p0 = cfg.schedule.free_timings()
    g = np.zeros_like(p0)
    for i in range(p0.size):
        vals = []
        for sign in (1.0, -1.0):
            p = p0.copy()
            p[i] += sign * eps
            probe = cfg.with_free_timings(p)
            vals.append(objective(integrate_forward(probe), probe)[0])
        g[i] = (vals[0] - vals[1]) / (2 * eps)
    return g
