"""
Re-planning with surveillance feedback
======================================

The planner believes adulticide is twice as effective as it really is.
An open-loop plan is computed once and executed blind; the closed loop
re-observes stage totals every two weeks and re-optimizes what is left.
"""

from dataclasses import replace
from pathlib import Path

from vectorsched.mpc import Mismatch, mpc_run, open_loop
from vectorsched.scenario import load_scenario

sc = load_scenario(Path(__file__).resolve().parents[1] / "scenarios" / "mpc_demo.yaml")
truth = sc.config
planner = Mismatch(adulticide_efficacy=2.0).planner_config(truth)

# %% open loop: plan once with the wrong model, evaluate on the truth
ol = open_loop(truth, planner, sc.optimizer)
print(f"open loop: planned F = {ol.planned_F:.3f}, realized F = {ol.realized_F:.3f}")
print("  timings", [round(t, 2) for t in ol.timings])

# %% closed loop, warm-started from the open-loop plan; exact observations, then 20% log-normal noise
for sigma in (0.0, 0.2):
    res = mpc_run(truth, planner.with_free_timings(ol.timings), replace(sc.mpc, obs_sigma=sigma, seed=1))
    print(f"closed loop, obs sigma {sigma}: realized F = {res.realized_F:.3f}")
    print("  timings", [round(t, 2) for t in res.executed_timings])
    for e in res.epochs:
        if e.committed:
            print(f"  epoch {e.index:2d} (day {e.t:5.1f}) committed interventions {e.committed}")

# %% noisy counts can mislead a single run; the acceptance suite compares medians over many seeds
