"""Command-line entry point: ``unidice {solve,run,sweep,robustness}``.

Machine-readable output goes only to --out; logs go to standard error.
Exit codes: 0 success, 2 invalid input, 3 degenerate input, 4 divergence, 1 other failures.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .data import collect
from .dice import DiceConfig, named_config
from .errors import (
    AssumptionViolationError,
    DegenerateInputError,
    DiceError,
    DivergedError,
    InvalidArgumentError,
    UnsupportedError,
)
from .exact import exact_solution
from .experiments import (
    DEFAULT_HORIZON,
    TRANSFORMS,
    exact_problem,
    reward_robustness,
    theorem2_sweep,
    theorem2_sweep_dataset,
    write_robustness,
    write_sweep,
)
from .mdp import build_grid, load_mdp, load_policy
from .optim import SgdaSettings, sgda
from .problem import Problem

log = logging.getLogger("unidice")

EXIT_OK, EXIT_FAILURE, EXIT_INVALID, EXIT_DEGENERATE, EXIT_DIVERGED = 0, 1, 2, 3, 4


def _add_env_args(p, policies=("target", "behavior")):
    p.add_argument("--mdp", help="MDP JSON file")
    for name in policies:
        p.add_argument(f"--{name}", help=f"{name} policy JSON file")
    p.add_argument("--grid", type=int, metavar="SIDE", help="use the built-in SIDE x SIDE grid instead of files")
    p.add_argument("--gamma", type=float, help="override the discount factor")
    p.add_argument("--d-data", help="JSON array over state-action pairs used as d^D in exact mode")


def _load_env(args):
    if args.grid is not None:
        mdp, target, behavior = build_grid(args.grid)
    else:
        if not (args.mdp and args.target and args.behavior):
            raise InvalidArgumentError("need --mdp, --target and --behavior (or --grid SIDE)")
        mdp = load_mdp(args.mdp)
        target = load_policy(args.target, mdp)
        behavior = load_policy(args.behavior, mdp)
    if args.gamma is not None:
        mdp = mdp.with_gamma(args.gamma)
    return mdp, target, behavior


def _exact_problem(args, mdp, target, behavior) -> Problem:
    if not args.d_data:
        return exact_problem(mdp, target, behavior, args.horizon)
    try:
        with open(args.d_data) as fh:
            d = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InvalidArgumentError(f"{args.d_data}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    try:
        return Problem.exact(mdp, target, d)
    except (InvalidArgumentError, TypeError, ValueError) as exc:
        raise InvalidArgumentError(f"{args.d_data}: {exc}") from exc


def _load_config(args) -> DiceConfig:
    if args.estimator:
        return named_config(args.estimator)
    if not args.config:
        raise InvalidArgumentError("need --config FILE or --estimator NAME")
    try:
        with open(args.config) as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InvalidArgumentError(f"{args.config}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    try:
        return DiceConfig.from_dict(obj)
    except InvalidArgumentError as exc:
        raise InvalidArgumentError(f"{args.config}: {exc}") from exc


def cmd_solve(args) -> int:
    mdp = load_mdp(args.mdp)
    if args.gamma is not None:
        mdp = mdp.with_gamma(args.gamma)
    pi = load_policy(args.policy, mdp)
    sol = exact_solution(mdp, pi)
    with open(args.out, "w") as fh:
        json.dump(sol.to_dict(), fh, indent=2)
    log.info("rho = %.12g", sol.rho)
    return EXIT_OK


def cmd_run(args) -> int:
    mdp, target, behavior = _load_env(args)
    config = _load_config(args)
    true_rho = exact_solution(mdp, target).rho
    if args.mode == "exact":
        problem = _exact_problem(args, mdp, target, behavior)
    else:
        ds = collect(mdp, behavior, args.n_traj, args.horizon, rng_seed=args.seed)
        problem = Problem.from_dataset(mdp, target, ds)
    settings = SgdaSettings(args.lr_primal, args.lr_dual, args.lr_lambda, args.steps, args.batch_size, not args.no_averaging, args.seed)
    try:
        sol, trace = sgda(config, problem, settings=settings)
    except DiceError as exc:
        raise type(exc)(f"{config.label()}: {exc}") from exc
    trace.to_csv(args.out, true_rho)
    last = trace.records[-1]
    log.info("%s: rho_q=%.6g rho_zeta=%.6g rho_lagrangian=%.6g true=%.6g", config.label(), last[1], last[2], last[3], true_rho)
    return EXIT_OK


def cmd_sweep(args) -> int:
    mdp, target, behavior = _load_env(args)
    if args.mode == "exact":
        rows = theorem2_sweep(_exact_problem(args, mdp, target, behavior), args.tolerance, args.with_baseline)
    else:
        rows = theorem2_sweep_dataset(
            mdp, target, behavior, n_trajectories=args.n_traj, horizon=args.horizon, n_seeds=args.n_seeds,
            seed=args.seed, tolerance=args.tolerance, with_baseline=args.with_baseline,
        )
    write_sweep(rows, args.out)
    mismatches = sum(not r.match for r in rows)
    log.info("%d rows, %d mismatches against the classification table", len(rows), mismatches)
    return EXIT_OK


def cmd_robustness(args) -> int:
    mdp, target, behavior = _load_env(args)
    problem = _exact_problem(args, mdp, target, behavior)
    rows = []
    for t in args.transform:
        rows.extend(reward_robustness(problem, t))
    write_robustness(rows, args.out)
    for r in rows:
        log.info("%s %s: back-transformed %.10g vs reference %.10g", r.transform, r.estimator, r.back_transformed, r.reference_estimate)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="unidice", description="Regularized Lagrangian off-policy evaluation toolkit")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to standard error")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common], help="exact Q-values, visitation and policy value")
    p.add_argument("--mdp", required=True)
    p.add_argument("--policy", required=True)
    p.add_argument("--gamma", type=float, help="override the discount; 1 solves the average-reward problem")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("run", parents=[common], help="one SGDA run, trace written as CSV")
    _add_env_args(p)
    p.add_argument("--config", help="DiceConfig JSON file")
    p.add_argument("--estimator", help="named estimator instead of --config (e.g. BestDICE)")
    p.add_argument("--mode", choices=("exact", "dataset"), default="exact")
    p.add_argument("--n-traj", type=int, default=100)
    p.add_argument("--horizon", type=int, default=DEFAULT_HORIZON)
    p.add_argument("--steps", type=int, default=10_000)
    p.add_argument("--batch-size", type=int, default=2048)
    p.add_argument("--lr-primal", type=float, default=1e-3)
    p.add_argument("--lr-dual", type=float, default=1e-3)
    p.add_argument("--lr-lambda", type=float, default=1e-3)
    p.add_argument("--no-averaging", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", parents=[common], help="closed-form classification sweep over the regularization table")
    _add_env_args(p)
    p.add_argument("--tolerance", type=float, default=1e-6)
    p.add_argument("--with-baseline", action="store_true", help="also include the unregularized rows")
    p.add_argument("--mode", choices=("exact", "dataset"), default="exact")
    p.add_argument("--horizon", type=int, default=DEFAULT_HORIZON)
    p.add_argument("--n-traj", type=int, default=100)
    p.add_argument("--n-seeds", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("robustness", parents=[common], help="dual and primal estimates under transformed rewards")
    _add_env_args(p)
    p.add_argument("--transform", action="append", choices=TRANSFORMS, required=True)
    p.add_argument("--horizon", type=int, default=DEFAULT_HORIZON)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_robustness)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except DegenerateInputError as exc:
        log.error("refusing degenerate input: %s", exc)
        return EXIT_DEGENERATE
    except DivergedError as exc:
        log.error("diverged: %s", exc)
        return EXIT_DIVERGED
    except (InvalidArgumentError, AssumptionViolationError, UnsupportedError) as exc:
        log.error("%s", exc)
        return EXIT_INVALID
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_INVALID
    except DiceError as exc:
        log.error("%s", exc)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
