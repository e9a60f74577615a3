"""Scenario files: one YAML document describing a run, validated strictly.

Every time or rate key carries its unit in the name (``*_days``,
``*_per_day``, ``*_c`` for Celsius) and unknown keys are rejected, so a
value in the wrong unit cannot slip through under a bare name.  Paths are
resolved relative to the scenario file.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np
import yaml

from .controls import CarryingCapacityModel, ControlSchedule, Intervention, Kind
from .defaults import default_rate_set, synthetic_profile
from .environment import (
    Environment,
    RateCurve,
    SeasonalTemperature,
    TemperatureError,
    load_temperature_series,
    seasonal_profile,
)
from .lifecycle import LifecycleState, ScenarioConfig, equilibrium_substate_profile
from .mpc import Mismatch, MpcSettings
from .optimizer import OptimizerSettings
from .risk import EpidemiologicalParams

__all__ = ["ConfigError", "Scenario", "load_scenario", "load_mismatch", "SCENARIO_SCHEMA", "MISMATCH_SCHEMA"]


class ConfigError(ValueError):
    """Invalid scenario input; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path or '<root>'}: {message}")
        self.path = path


# rate-curve keys and the RateSet field each one fills
RATE_KEYS = {
    "dev_egg_per_day": "dev_egg",
    "dev_larva_per_day": "dev_larva",
    "dev_pupa_per_day": "dev_pupa",
    "dev_gonotrophic_per_day": "dev_gonotrophic",
    "mort_egg_per_day": "mort_egg",
    "mort_larva_per_day": "mort_larva",
    "mort_pupa_per_day": "mort_pupa",
    "mort_adult_per_day": "mort_adult",
    "oviposition_eggs_per_cycle": "oviposition",
    "bites_per_cycle": "bites_per_cycle",
    "eip_rate_per_day": "eip_rate",
}

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}
_posint = {"type": "integer", "minimum": 1}
_prob = {"type": "number", "minimum": 0, "maximum": 1}
_curve = {
    "type": "array",
    "minItems": 1,
    "items": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
}
_vec = {"type": "array", "items": _nonneg}


def _obj(props: dict, required: tuple = ()) -> dict:
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


SCENARIO_SCHEMA = _obj(
    {
        "environment": _obj({
            "temperature_csv": {"type": "string"},
            "constant_temp_c": _num,
            "synthetic": _obj({"mean_c": _num, "amplitude_c": _nonneg, "coldest_day_of_year": _posint}),
            "start_day_of_year": {"type": "integer", "minimum": 1, "maximum": 366},
            "smoothing_window_days": _posint,
        }),
        "rates": _obj({k: _curve for k in RATE_KEYS}),
        "population": _obj({
            "substates": _posint,
            "dt_days": _pos,
            "horizon_days": _pos,
            "recruitment_clamp": {"type": "boolean"},
            "clamp_scale": _pos,
            "c0": _pos,
            "capacity_floor_fraction": _pos,
            "alpha": {"oneOf": [
                _nonneg,
                _obj({"times_days": {"type": "array", "items": _num, "minItems": 1}, "values": _vec},
                     ("times_days", "values")),
            ]},
            "initial_state": {"oneOf": [
                {"const": "default"},
                _obj({"E": _vec, "L": _vec, "P": _vec, "A": _vec}, ("E", "L", "P", "A")),
                _obj({"stage_totals": _obj({"E": _nonneg, "L": _nonneg, "P": _nonneg, "A": _nonneg},
                                           ("E", "L", "P", "A"))}, ("stage_totals",)),
            ]},
        }),
        "epi": _obj({
            "human_population": _pos,
            "intrinsic_incubation_days": _pos,
            "phi_hv": _prob,
            "phi_vh": _prob,
        }),
        "schedule": {
            "type": "array",
            "items": _obj({
                "kind": {"enum": [k.value for k in Kind]},
                "timing_days": _num,
                "free": {"type": "boolean"},
                "bounds_days": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
                "efficacy_per_day": _nonneg,
                "efficacy_fraction": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                "duration_days": _pos,
                "recovery_time_days": _pos,
                "sharpness_per_day": _pos,
                "count": _posint,
            }, ("kind",)),
        },
        "optimizer": _obj({
            "max_iters": {"type": "integer", "minimum": 0},
            "step_init_days": _pos,
            "max_step_days": _pos,
            "min_step_days": _pos,
            "backtrack_factor": _pos,
            "armijo_c": _pos,
            "grad_tol": _pos,
            "f_tol": _nonneg,
            "stall_window": _posint,
            "restarts": _posint,
            "seed": {"type": "integer", "minimum": 0},
        }),
        "mpc": _obj({
            "epoch_days": _pos,
            "horizon_days": {"oneOf": [_pos, {"type": "null"}]},
            "obs_sigma": {"oneOf": [_nonneg, _obj({s: _nonneg for s in "ELPA"})]},
            "fresh_restarts": {"type": "integer", "minimum": 0},
            "true_temperature_csv": {"type": "string"},
        }),
        "gradcheck": _obj({"eps_days": _pos, "threshold": _pos}),
    },
    ("population",),
)

MISMATCH_SCHEMA = _obj({
    "larvicide_efficacy_factor": _pos,
    "adulticide_efficacy_factor": _pos,
    "habitat_efficacy_factor": _pos,
    "rate_factors": _obj({k: _pos for k in RATE_KEYS}),
})


@dataclass(frozen=True)
class Scenario:
    config: ScenarioConfig
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)
    mpc: MpcSettings = field(default_factory=MpcSettings)
    mpc_true_environment: Environment | None = None
    gradcheck_eps: float = 0.01
    gradcheck_threshold: float = 1e-3
    source: Path | None = None


def _read_yaml(path: Path) -> dict:
    if not path.is_file():
        raise ConfigError("", f"file not found: {path}")
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError("", f"{path}: not valid YAML: {exc}") from None
    return {} if doc is None else doc


def _validate(doc, schema) -> None:
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise ConfigError("/".join(str(p) for p in e.absolute_path), e.message)


def _profile(env: dict, base: Path, key_prefix: str = "environment") -> SeasonalTemperature:
    sources = [k for k in ("temperature_csv", "constant_temp_c", "synthetic") if k in env]
    if len(sources) > 1:
        raise ConfigError(key_prefix, f"give only one temperature source, got {sources}")
    window = env.get("smoothing_window_days", 7)
    if "temperature_csv" in env:
        return _csv_profile(base / env["temperature_csv"], window, f"{key_prefix}/temperature_csv")
    if "constant_temp_c" in env:
        return SeasonalTemperature.constant(env["constant_temp_c"])
    syn = env.get("synthetic", {})
    return synthetic_profile(syn.get("mean_c", 24.75), syn.get("amplitude_c", 4.5), syn.get("coldest_day_of_year", 20))


def _csv_profile(path: Path, window: int, key: str) -> SeasonalTemperature:
    if not path.is_file():
        raise ConfigError(key, f"file not found: {path}")
    try:
        return seasonal_profile(load_temperature_series(path), window)
    except (TemperatureError, ValueError) as exc:
        raise ConfigError(key, str(exc)) from None


def _interventions(items: list, horizon: float) -> tuple[Intervention, ...]:
    out = []
    for n, item in enumerate(items):
        where = f"schedule/{n}"
        kind = Kind(item["kind"])
        if kind.is_pulse:
            need, forbid = ("efficacy_per_day", "duration_days"), ("efficacy_fraction", "recovery_time_days")
        else:
            need, forbid = ("efficacy_fraction", "recovery_time_days"), ("efficacy_per_day", "duration_days")
        for k in need:
            if k not in item:
                raise ConfigError(where, f"{kind.value} needs '{k}'")
        for k in forbid:
            if k in item:
                raise ConfigError(f"{where}/{k}", f"not applicable to {kind.value}")
        free = item.get("free", True)
        bounds = tuple(item["bounds_days"]) if "bounds_days" in item else None
        footprint = item.get("duration_days", 0.0)
        if "timing_days" in item:
            timing = item["timing_days"]
        elif free:
            lo, hi = bounds if bounds is not None else (0.0, max(0.0, horizon - footprint))
            timing = 0.5 * (lo + hi)
        else:
            raise ConfigError(where, "a fixed intervention needs 'timing_days'")
        kwargs = dict(
            kind=kind,
            timing=timing,
            efficacy=item.get("efficacy_per_day", item.get("efficacy_fraction")),
            duration=item.get("duration_days"),
            recovery_time=item.get("recovery_time_days"),
            free=free,
            bounds=bounds,
        )
        if "sharpness_per_day" in item:
            kwargs["sharpness"] = item["sharpness_per_day"]
        try:
            iv = Intervention(**kwargs)
        except ValueError as exc:
            raise ConfigError(where, str(exc)) from None
        out.extend([iv] * item.get("count", 1))
    return tuple(out)


def _initial_state(entry, J: int, env: Environment, partial: ScenarioConfig) -> LifecycleState | None:
    if entry is None or entry == "default":
        return None
    if "stage_totals" in entry:
        weights = equilibrium_substate_profile(env.temperature(0.0), partial)
        return LifecycleState(**{s: entry["stage_totals"][s] * weights[s] for s in "ELPA"})
    for s in "ELPA":
        if len(entry[s]) != J:
            raise ConfigError(f"population/initial_state/{s}", f"expected {J} substates, got {len(entry[s])}")
    return LifecycleState(**{s: np.asarray(entry[s], dtype=float) for s in "ELPA"})


def build_scenario(doc: dict, base: Path = Path("."), source: Path | None = None) -> Scenario:
    """Validate a parsed scenario document and build the run objects."""
    _validate(doc, SCENARIO_SCHEMA)
    env_doc = doc.get("environment", {})
    profile = _profile(env_doc, base)
    rates = default_rate_set()
    overrides = {}
    for key, curve in doc.get("rates", {}).items():
        try:
            overrides[RATE_KEYS[key]] = RateCurve.from_pairs(curve)
        except ValueError as exc:
            raise ConfigError(f"rates/{key}", str(exc)) from None
    rates = rates.replace(**overrides)
    temps = profile.day_of_year_temp
    try:
        rates.check_operational(float(temps.min()), float(temps.max()))
    except ValueError as exc:
        raise ConfigError("rates", str(exc)) from None
    env = Environment(profile, rates, env_doc.get("start_day_of_year", 1))

    pop = doc["population"]
    horizon = pop.get("horizon_days", 365.0)
    alpha = pop.get("alpha", 1.0)
    if isinstance(alpha, dict):
        if len(alpha["times_days"]) != len(alpha["values"]):
            raise ConfigError("population/alpha", "times_days and values differ in length")
        alpha = (alpha["times_days"], alpha["values"])
    try:
        capacity = CarryingCapacityModel(
            c0=pop.get("c0", 10_000.0),
            alpha=alpha,
            floor_fraction=pop.get("capacity_floor_fraction", 1e-6),
        )
    except ValueError as exc:
        raise ConfigError("population", str(exc)) from None
    epi_doc = doc.get("epi", {})
    epi = EpidemiologicalParams(
        human_population=epi_doc.get("human_population", 5_000.0),
        intrinsic_incubation_days=epi_doc.get("intrinsic_incubation_days", 5.0),
        phi_hv=epi_doc.get("phi_hv", 0.5),
        phi_vh=epi_doc.get("phi_vh", 0.5),
    )
    schedule = ControlSchedule(_interventions(doc.get("schedule", []), horizon))
    try:
        cfg = ScenarioConfig(
            environment=env,
            capacity=capacity,
            epi=epi,
            schedule=schedule,
            substates=pop.get("substates", 16),
            horizon=horizon,
            dt=pop.get("dt_days", 0.05),
            recruitment_clamp=pop.get("recruitment_clamp", True),
            clamp_scale=pop.get("clamp_scale", 50.0),
        )
    except ValueError as exc:
        raise ConfigError("population", str(exc)) from None
    init = _initial_state(pop.get("initial_state"), cfg.J, env, cfg)
    if init is not None:
        cfg = cfg.window(cfg.t_start, cfg.horizon, init)
    try:
        schedule.validate_timings(cfg.t_start, cfg.t_end)
    except ValueError as exc:
        raise ConfigError("schedule", str(exc)) from None

    o = doc.get("optimizer", {})
    try:
        opt = OptimizerSettings(
            max_iters=o.get("max_iters", 200),
            step_init=o.get("step_init_days", 8.0),
            max_step=o.get("max_step_days", 32.0),
            min_step=o.get("min_step_days", 1e-3),
            backtrack_factor=o.get("backtrack_factor", 0.5),
            armijo_c=o.get("armijo_c", 1e-4),
            grad_tol=o.get("grad_tol", 1e-7),
            f_tol=o.get("f_tol", 1e-6),
            stall_window=o.get("stall_window", 5),
            n_restarts=o.get("restarts", 100),
            rng_seed=o.get("seed", 0),
        )
    except ValueError as exc:
        raise ConfigError("optimizer", str(exc)) from None
    m = doc.get("mpc", {})
    try:
        mpc = MpcSettings(
            epoch_days=m.get("epoch_days", 7.0),
            horizon_days=m.get("horizon_days"),
            obs_sigma=m.get("obs_sigma", 0.0),
            fresh_restarts=m.get("fresh_restarts", 5),
            seed=opt.rng_seed,
            optimizer=opt,
        )
    except ValueError as exc:
        raise ConfigError("mpc", str(exc)) from None
    true_env = None
    if "true_temperature_csv" in m:
        true_profile = _csv_profile(base / m["true_temperature_csv"], env_doc.get("smoothing_window_days", 7),
                                    "mpc/true_temperature_csv")
        true_env = Environment(true_profile, rates, env.start_day_of_year)
    g = doc.get("gradcheck", {})
    return Scenario(cfg, opt, mpc, true_env, g.get("eps_days", 0.01), g.get("threshold", 1e-3), source)


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    return build_scenario(_read_yaml(path), path.parent, path)


def load_mismatch(path: str | Path) -> Mismatch:
    """Planner-versus-truth factors from a small YAML file."""
    path = Path(path)
    doc = _read_yaml(path)
    _validate(doc, MISMATCH_SCHEMA)
    return Mismatch(
        larvicide_efficacy=doc.get("larvicide_efficacy_factor", 1.0),
        adulticide_efficacy=doc.get("adulticide_efficacy_factor", 1.0),
        habitat_efficacy=doc.get("habitat_efficacy_factor", 1.0),
        rates={RATE_KEYS[k]: v for k, v in doc.get("rate_factors", {}).items()},
    )
