import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import make_cfg
from vectorsched import optimizer as opt_mod
from vectorsched.controls import Intervention, Kind
from vectorsched.defaults import default_environment
from vectorsched.lifecycle import IntegrationError, integrate_forward
from vectorsched.optimizer import (
    OptimizationError,
    OptimizerSettings,
    canonicalize,
    descend,
    multi_start,
    project,
    projected_gradient,
    random_inits,
)
from vectorsched.risk import objective

FAST = OptimizerSettings(max_iters=60, n_restarts=3)


def one_pulse_cfg(kind=Kind.ADULTICIDE, eff=0.3, D=5.0, horizon=120.0):
    return make_cfg(env=default_environment(), schedule=[Intervention(kind, 50.0, eff, duration=D)],
                    J=4, horizon=horizon)


def scan(cfg, step=0.25):
    lo, hi = cfg.timing_bounds()[0]
    grid = np.arange(lo, hi + 1e-9, step)
    F = []
    for p in grid:
        probe = cfg.with_free_timings([p])
        F.append(objective(integrate_forward(probe), probe)[0])
    return grid, np.array(F)


class TestProject:
    def test_interior(self):
        assert project([5.0], [[0, 300]]).tolist() == [5.0]

    def test_below(self):
        assert project([-5.0], [[0, 300]]).tolist() == [0.0]

    def test_above(self):
        assert project([400.0], [[0, 300]]).tolist() == [300.0]

    @given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=6))
    def test_feasible_and_idempotent(self, xs):
        b = np.tile([0.0, 300.0], (len(xs), 1))
        p = project(xs, b)
        assert np.all((p >= 0) & (p <= 300))
        assert np.array_equal(project(p, b), p)

    def test_projected_gradient_drops_blocked_components(self):
        g = projected_gradient(np.array([0.0, 300.0, 5.0]), np.array([1.0, -1.0, 1.0]), np.tile([0.0, 300.0], (3, 1)))
        assert g.tolist() == [0.0, 0.0, 1.0]


def test_zero_gradient_start_is_returned():
    cfg = make_cfg(env=default_environment(), J=4, horizon=30.0,
                   schedule=[Intervention(Kind.ADULTICIDE, 45.0, 0.3, duration=3, bounds=(40.0, 50.0))])
    rec = descend(cfg, [45.0], FAST)
    assert rec.converged and rec.stop_reason == "grad_tol"
    assert rec.final_timings == [45.0] and rec.iters == 0


def test_matches_grid_scan():
    cfg = one_pulse_cfg()
    grid, F = scan(cfg)
    res = multi_start(cfg, FAST)
    assert abs(res.best_timings[0] - grid[np.argmin(F)]) <= 0.5
    assert res.best_F <= F.min() + 1e-9 * abs(F.min())


def test_trace_nonincreasing_and_feasible():
    ivs = [Intervention(Kind.ADULTICIDE, 20.0, 0.3, duration=5), Intervention(Kind.LARVICIDE, 60.0, 0.5, duration=7),
           Intervention(Kind.HABITAT, 30.0, 0.3, recovery_time=15)]
    cfg = make_cfg(env=default_environment(), schedule=ivs, J=4, horizon=120.0)
    res = multi_start(cfg, FAST)
    bounds = cfg.timing_bounds()
    for rec in res.records:
        assert np.all(np.diff(rec.trace) <= 0)
        t = np.array(rec.final_timings)
        assert np.all((t >= bounds[:, 0]) & (t <= bounds[:, 1]))
        assert res.best_F <= rec.final_F
    assert res.best_F == min(r.final_F for r in res.records)


def test_identical_interventions_reported_sorted():
    ivs = [Intervention(Kind.ADULTICIDE, 0.0, 0.3, duration=3)] * 3 + [Intervention(Kind.LARVICIDE, 0.0, 0.3, duration=3)]
    cfg = make_cfg(schedule=ivs)
    out = canonicalize(cfg, [9.0, 3.0, 5.0, 1.0])
    assert out.tolist() == [3.0, 5.0, 9.0, 1.0]


def test_deterministic():
    cfg = one_pulse_cfg()
    a = multi_start(cfg, FAST).to_dict()
    b = multi_start(cfg, FAST).to_dict()
    assert a == b


def test_more_restarts_never_worse():
    cfg = make_cfg(env=default_environment(), J=4, horizon=120.0,
                   schedule=[Intervention(Kind.ADULTICIDE, 0.0, 0.3, duration=5)] * 2)
    few = multi_start(cfg, OptimizerSettings(max_iters=30, n_restarts=2))
    more = multi_start(cfg, OptimizerSettings(max_iters=30, n_restarts=4))
    assert more.best_F <= few.best_F
    assert [r.to_dict() for r in more.records[:2]] == [r.to_dict() for r in few.records]


def test_single_restart_is_descend():
    cfg = one_pulse_cfg()
    s = OptimizerSettings(max_iters=40, n_restarts=1, rng_seed=5)
    res = multi_start(cfg, s)
    init = random_inits(cfg.timing_bounds(), 1, 5)[0]
    assert res.records[0].to_dict(True) == descend(cfg, init, s).to_dict(True)


def test_failed_trial_points_are_rejected(monkeypatch):
    cfg = one_pulse_cfg()
    real = opt_mod._forward

    def fragile(c, p):
        if p[0] > 60.0:
            raise IntegrationError("synthetic failure", 0.0)
        return real(c, p)

    monkeypatch.setattr(opt_mod, "_forward", fragile)
    rec = descend(cfg, [55.0], FAST)
    assert rec.final_timings[0] <= 60.0
    assert np.all(np.diff(rec.trace) <= 0)


def test_failed_start_raises_and_all_failed_aggregates(monkeypatch):
    cfg = one_pulse_cfg()

    def broken(c, p):
        raise IntegrationError("synthetic failure", 0.0)

    monkeypatch.setattr(opt_mod, "_forward", broken)
    with pytest.raises(IntegrationError):
        descend(cfg, [55.0], FAST)
    with pytest.raises(OptimizationError, match="all restarts failed"):
        multi_start(cfg, FAST)


def test_settings_validation():
    with pytest.raises(ValueError):
        OptimizerSettings(backtrack_factor=1.5)
    with pytest.raises(ValueError):
        OptimizerSettings(n_restarts=0)
    with pytest.raises(ValueError):
        OptimizerSettings(step_init=10.0, max_step=5.0)
