"""Time-dependent dengue reproduction number and the cumulative-risk objective."""
from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .environment import Environment
    from .lifecycle import ScenarioConfig, Trajectory

__all__ = [
    "EpidemiologicalParams",
    "RiskCurve",
    "SingularParameterError",
    "r0_coefficient",
    "r0_at",
    "d_r0_dA",
    "objective",
    "risk_curve",
]


class SingularParameterError(ValueError):
    pass


@dataclass(frozen=True)
class EpidemiologicalParams:
    """Host-side and per-bite transmission parameters.

    ``intrinsic_incubation_days`` is the intrinsic incubation period in
    days; it multiplies R0 directly.
    """

    human_population: float = 10_000.0
    intrinsic_incubation_days: float = 5.0
    phi_hv: float = 0.5
    phi_vh: float = 0.5

    def __post_init__(self):
        if self.human_population <= 0:
            raise ValueError("human_population must be positive")
        if self.intrinsic_incubation_days <= 0:
            raise ValueError("intrinsic_incubation_days must be positive")
        for name in ("phi_hv", "phi_vh"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must be a probability")


def r0_coefficient(rates: dict, epi: EpidemiologicalParams):
    """R0 per adult female, given rates already evaluated at some temperature(s).

    ``n_B^2 g_ae^2 phi_HV phi_VH / g_ad * eta_H^-1 / (1 + g_ad/g_V) / N_H``
    """
    n_b = np.asarray(rates["bites_per_cycle"], dtype=float)
    g_ae = np.asarray(rates["dev_gonotrophic"], dtype=float)
    g_ad = np.asarray(rates["mort_adult"], dtype=float)
    g_v = np.asarray(rates["eip_rate"], dtype=float)
    if np.any(g_ad <= 0):
        raise SingularParameterError("adult mortality rate must be positive in R0")
    if np.any(g_v <= 0):
        raise SingularParameterError("extrinsic incubation rate must be positive in R0")
    out = (
        n_b**2 * g_ae**2 * epi.phi_hv * epi.phi_vh / g_ad
        * epi.intrinsic_incubation_days / (1.0 + g_ad / g_v) / epi.human_population
    )
    return float(out) if out.ndim == 0 else out


def d_r0_dA(t, epi: EpidemiologicalParams, environment: "Environment"):
    """Derivative of R0 with respect to any adult substate (state-independent)."""
    temps = environment.temperature(t)
    return r0_coefficient(environment.rates.evaluate(temps), epi)


def r0_at(A_total, t, epi: EpidemiologicalParams, environment: "Environment"):
    """R0 for adult female population ``A_total`` at time ``t``."""
    A_total = np.asarray(A_total, dtype=float)
    if np.any(A_total < 0):
        raise ValueError("adult population must be nonnegative")
    out = A_total * d_r0_dA(t, epi, environment)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class RiskCurve:
    times: np.ndarray
    r0: np.ndarray
    F: float

    @property
    def horizon(self) -> float:
        return float(self.times[-1] - self.times[0])

    @property
    def mean_daily_r0(self) -> float:
        return self.F / self.horizon

    def summary(self) -> dict:
        i = int(np.argmax(self.r0))
        return {
            "F": float(self.F),
            "mean_daily_r0": self.mean_daily_r0,
            "peak_r0": float(self.r0[i]),
            "peak_t": float(self.times[i]),
        }


def risk_curve(traj: "Trajectory", cfg: "ScenarioConfig") -> RiskCurve:
    if traj.times.size != cfg.n_steps + 1 or traj.times[0] != cfg.t_start:
        raise ValueError("trajectory grid does not match the scenario grid")
    coef = source_on_half_grid(cfg)[::2]
    r0 = traj.A_total * coef
    F = float(np.trapezoid(r0, traj.times))
    return RiskCurve(traj.times, r0, F)


def objective(traj: "Trajectory", cfg: "ScenarioConfig") -> tuple[float, RiskCurve]:
    """``F = integral of R0 over the run`` by the trapezoidal rule on the grid."""
    curve = risk_curve(traj, cfg)
    return curve.F, curve


def source_on_half_grid(cfg: "ScenarioConfig") -> np.ndarray:
    """``dR0/dA_j`` sampled on the integrator's half-step grid."""
    return np.atleast_1d(r0_coefficient(cfg.forcing().rates, cfg.epi))
