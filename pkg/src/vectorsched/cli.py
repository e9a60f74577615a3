"""Command-line entry point: ``vectorsched <command> --scenario FILE --out DIR``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 a check (gradient agreement) failed.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .adjoint import finite_difference_gradient, value_and_gradient
from .controls import InfeasibleCapacityError, Kind, carrying_capacity, induced_mortality_on_grid
from .lifecycle import IntegrationError, integrate_forward
from .mpc import mpc_run, open_loop
from .optimizer import OptimizationError, multi_start
from .results import trajectory_rows, write_csv, write_json
from .risk import SingularParameterError, objective
from .scenario import ConfigError, Scenario, load_mismatch, load_scenario

__all__ = ["main", "build_parser"]

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_CHECK = 0, 2, 3, 4

log = logging.getLogger("vectorsched")


def _scenario_with_seed(args) -> Scenario:
    sc = load_scenario(args.scenario)
    if args.seed is not None:
        opt = replace(sc.optimizer, rng_seed=args.seed)
        sc = replace(sc, optimizer=opt, mpc=replace(sc.mpc, seed=args.seed, optimizer=opt))
    return sc


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args) -> int:
    sc = _scenario_with_seed(args)
    out = _out_dir(args)
    cfg = sc.config
    traj = integrate_forward(cfg)
    F, curve = objective(traj, cfg)
    write_csv(out / "trajectory.csv", ["t", "E_total", "L_total", "P_total", "A_total", "R0"],
              trajectory_rows(traj, curve))
    write_json(out / "summary.json", curve.summary(), "summary")
    print(f"F = {F:.6g}  mean daily R0 = {curve.mean_daily_r0:.6g}")
    return EXIT_OK


def gradient_report(sc: Scenario, eps: float, threshold: float) -> dict:
    cfg = sc.config
    if not cfg.schedule.free_indices:
        raise ConfigError("schedule", "gradcheck needs at least one free timing")
    F, g_adj = value_and_gradient(cfg)
    g_fd = finite_difference_gradient(cfg, eps)
    scale = float(np.max(np.abs(g_fd))) + 1e-12
    rel = np.abs(g_adj - g_fd) / scale
    params = []
    for n, i in enumerate(cfg.schedule.free_indices):
        iv = cfg.schedule.interventions[i]
        params.append({"index": i, "kind": iv.kind.value, "timing": iv.timing,
                       "adjoint": g_adj[n], "finite_diff": g_fd[n], "rel_err": rel[n]})
    worst = float(rel.max())
    return {"eps_days": eps, "threshold": threshold, "max_rel_err": worst,
            "passed": bool(worst <= threshold), "F": F, "parameters": params}


def cmd_gradcheck(args) -> int:
    sc = _scenario_with_seed(args)
    out = _out_dir(args)
    eps = sc.gradcheck_eps if args.eps is None else args.eps
    threshold = sc.gradcheck_threshold if args.threshold is None else args.threshold
    report = write_json(out / "gradcheck.json", gradient_report(sc, eps, threshold), "gradcheck")
    for p in report["parameters"]:
        print(f"{p['index']:3d} {p['kind']:20s} adjoint={p['adjoint']: .6e} fd={p['finite_diff']: .6e} rel={p['rel_err']:.2e}")
    verdict = "PASS" if report["passed"] else "FAIL"
    print(f"{verdict}: max rel err {report['max_rel_err']:.3e} (threshold {threshold:g})")
    return EXIT_OK if report["passed"] else EXIT_CHECK


def cmd_optimize(args) -> int:
    sc = _scenario_with_seed(args)
    out = _out_dir(args)
    settings = sc.optimizer
    if args.restarts is not None:
        settings = replace(settings, n_restarts=args.restarts)
    if args.max_iters is not None:
        settings = replace(settings, max_iters=args.max_iters)
    res = multi_start(sc.config, settings)
    best = sc.config.with_free_timings(res.best_timings)
    _, curve = objective(integrate_forward(best), best)
    write_json(out / "result.json", {**res.to_dict(), "summary": curve.summary()}, "optimization")
    write_csv(out / "risk.csv", ["t", "r0"], zip(curve.times, curve.r0))
    print(f"best F = {res.best_F:.6g} at {np.round(res.best_timings, 3).tolist()}")
    return EXIT_OK


def cmd_mpc(args) -> int:
    sc = _scenario_with_seed(args)
    out = _out_dir(args)
    settings = sc.mpc
    for flag, name in (("epoch_days", "epoch_days"), ("horizon_days", "horizon_days"),
                       ("obs_sigma", "obs_sigma"), ("fresh_restarts", "fresh_restarts")):
        value = getattr(args, flag)
        if value is not None:
            settings = replace(settings, **{name: value})
    true_cfg = sc.config
    if sc.mpc_true_environment is not None:
        true_cfg = replace(true_cfg, environment=sc.mpc_true_environment)
    planner_cfg = sc.config
    if args.mismatch is not None:
        planner_cfg = load_mismatch(args.mismatch).planner_config(sc.config)
    result = mpc_run(true_cfg, planner_cfg, settings)
    doc = result.to_dict()
    doc["open_loop"] = None
    if args.compare_open_loop:
        ol = open_loop(true_cfg, planner_cfg, settings.optimizer)
        doc["open_loop"] = {"timings": ol.timings, "planned_F": ol.planned_F, "realized_F": ol.realized_F}
    write_json(out / "closed_loop.json", doc, "closed_loop")
    rows = []
    for e in result.epochs:
        obs = e.observation
        rows.append([e.index, e.t, *(("",) * 4 if obs is None else (obs.E, obs.L, obs.P, obs.A)),
                     e.planned_F, " ".join(str(i) for i in e.committed), e.status])
    write_csv(out / "epochs.csv",
              ["epoch", "t", "E_obs", "L_obs", "P_obs", "A_obs", "planned_F", "committed", "status"], rows)
    print(f"realized F = {result.realized_F:.6g}; executed timings {np.round(result.executed_timings, 3).tolist()}")
    return EXIT_OK


def cmd_emit_profiles(args) -> int:
    sc = _scenario_with_seed(args)
    out = _out_dir(args)
    cfg = sc.config
    t = cfg.times
    rl = induced_mortality_on_grid(cfg.schedule, Kind.LARVICIDE, t)
    ra = induced_mortality_on_grid(cfg.schedule, Kind.ADULTICIDE, t)
    cap = carrying_capacity(cfg.capacity.with_interventions(cfg.schedule), t)
    write_csv(out / "profiles.csv", ["t", "larvicide_mortality", "adulticide_mortality", "carrying_capacity"],
              zip(t, rl, ra, cap))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", required=True, help="scenario YAML file")
    common.add_argument("--out", default=".", help="output directory (created if needed)")
    common.add_argument("--seed", type=int, default=None, help="overrides the scenario's random seed")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="vectorsched", description="Adjoint-based vector-control timing.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="forward run; trajectory CSV and risk summary")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("gradcheck", parents=[common], help="adjoint vs finite-difference gradient")
    p.add_argument("--eps", type=float, default=None, help="finite-difference step (days)")
    p.add_argument("--threshold", type=float, default=None, help="maximum allowed relative error")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("optimize", parents=[common], help="multi-start timing optimization")
    p.add_argument("--restarts", type=int, default=None)
    p.add_argument("--max-iters", type=int, default=None)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("mpc", parents=[common], help="closed-loop receding-horizon run")
    p.add_argument("--epoch-days", type=float, default=None)
    p.add_argument("--horizon-days", type=float, default=None)
    p.add_argument("--obs-sigma", type=float, default=None)
    p.add_argument("--fresh-restarts", type=int, default=None)
    p.add_argument("--mismatch", default=None, help="YAML of planner-versus-truth factors")
    p.add_argument("--compare-open-loop", action="store_true", help="also run the open-loop plan on the truth")
    p.set_defaults(func=cmd_mpc)

    p = sub.add_parser("emit-profiles", parents=[common], help="control profiles on the time grid")
    p.set_defaults(func=cmd_emit_profiles)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IntegrationError, InfeasibleCapacityError, SingularParameterError, OptimizationError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
