import numpy as np
import pytest
from hypothesis import settings

from vectorsched.controls import CarryingCapacityModel, ControlSchedule
from vectorsched.environment import RATE_NAMES, Environment, RateCurve, RateSet, SeasonalTemperature
from vectorsched.lifecycle import ScenarioConfig
from vectorsched.risk import EpidemiologicalParams

settings.register_profile("repo", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("repo")

BASE_RATES = dict(
    dev_egg=0.3, dev_larva=0.12, dev_pupa=0.4, dev_gonotrophic=0.25,
    mort_egg=0.05, mort_larva=0.08, mort_pupa=0.05, mort_adult=0.06,
    oviposition=40.0, bites_per_cycle=0.8, eip_rate=0.1,
)


def constant_rates(**values) -> RateSet:
    vals = {**BASE_RATES, **values}
    return RateSet(**{name: RateCurve.constant(vals[name]) for name in RATE_NAMES})


def constant_env(temp: float = 25.0, **rates) -> Environment:
    return Environment(SeasonalTemperature.constant(temp), constant_rates(**rates))


def make_cfg(env=None, schedule=(), J=4, horizon=30.0, dt=0.05, c0=1e4, initial_state=None,
             clamp=True, epi=None, t_start=0.0) -> ScenarioConfig:
    return ScenarioConfig(
        environment=env if env is not None else constant_env(),
        capacity=CarryingCapacityModel(c0),
        epi=epi or EpidemiologicalParams(),
        schedule=ControlSchedule(tuple(schedule)),
        substates=J,
        horizon=horizon,
        dt=dt,
        t_start=t_start,
        initial_state=initial_state,
        recruitment_clamp=clamp,
    )


@pytest.fixture
def tmp_csv(tmp_path):
    def write(text: str, name: str = "temps.csv"):
        p = tmp_path / name
        p.write_text(text)
        return p
    return write


def rel_err(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.max(np.abs(a - b)) / (np.max(np.abs(b)) + 1e-300))


ACCEPTANCE: list[tuple[str, bool, str]] = []


def record_criterion(name: str, passed: bool, detail: str) -> None:
    """Log one acceptance criterion outcome; printed in the terminal summary."""
    ACCEPTANCE.append((name, bool(passed), detail))
    print(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
