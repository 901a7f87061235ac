"""Sweeps over the regularization table, reward-robustness studies, and their CSV reports."""
from __future__ import annotations

import csv
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .data import collect, population_dD
from .dice import (
    BIASED,
    UNBIASED,
    DiceConfig,
    closed_form_solution,
    estimates,
    table_configs,
    unbiasedness_table,
)
from .errors import DegenerateInputError, InvalidArgumentError
from .mdp import Policy, TabularMdp, load_mdp, load_policy
from .problem import Problem

DEFAULT_HORIZON = 100
ESTIMATORS = ("primal", "dual", "lagrangian")
SWEEP_HEADER = [
    "config", "case", "estimator", "estimate", "true_rho", "abs_error",
    "tolerance", "std_error", "expected", "observed", "match",
]
ROBUSTNESS_HEADER = [
    "transform", "estimator", "estimate", "back_transformed",
    "reference_estimate", "true_rho", "dev_reference", "dev_truth",
]


def fixture_path(name: str):
    return resources.files("unidice") / "fixtures" / name


def load_fixture(prefix: str):
    """(mdp, target, behavior) for 'designed'; (mdp, policy, policy) for 'chain' and 'single_state'."""
    mdp = load_mdp(fixture_path(f"{prefix}_mdp.json"))
    if prefix == "designed":
        return mdp, load_policy(fixture_path("designed_target.json")), load_policy(fixture_path("designed_behavior.json"))
    pi = load_policy(fixture_path(f"{prefix}_policy.json"))
    return mdp, pi, pi


def exact_problem(mdp: TabularMdp, target: Policy, behavior: Policy, horizon: int = DEFAULT_HORIZON) -> Problem:
    """Exact problem with d^D the behavior's population state-action frequencies over ``horizon`` steps."""
    return Problem.exact(mdp, target, population_dD(mdp, behavior, horizon))


@dataclass(frozen=True)
class SweepRow:
    config: DiceConfig
    estimator: str
    estimate: float
    true_rho: float
    tolerance: float
    expected: str
    std_error: float | None = None

    @property
    def abs_error(self) -> float:
        return abs(self.estimate - self.true_rho)

    @property
    def observed(self) -> str:
        bound = self.tolerance if self.std_error is None else max(3.0 * self.std_error, self.tolerance)
        return UNBIASED if self.abs_error < bound else BIASED

    @property
    def match(self) -> bool:
        return self.observed == self.expected

    def as_list(self):
        return [
            self.config.label(), self.config.case, self.estimator, repr(self.estimate), repr(self.true_rho),
            repr(self.abs_error), self.tolerance, "" if self.std_error is None else repr(self.std_error),
            self.expected, self.observed, int(self.match),
        ]


def check_separating(problem: Problem, tol: float = 1e-8):
    """Refuse inputs on which biased and unbiased estimators cannot be told apart."""
    support = problem.d_data > 0
    r = problem.reward[support]
    if r.size == 0 or np.ptp(r) <= tol:
        raise DegenerateInputError("reward is constant on the data support, so a biased Q or zeta can still give the right value")
    if np.max(np.abs(problem.d_data - problem.target_visitation())) <= tol:
        raise DegenerateInputError("d^D equals d^pi: the correction ratio is 1 everywhere and hides any dual bias")
    if abs(problem.target_value()) <= tol:
        raise DegenerateInputError("policy value is 0, so relative deviations cannot be measured")


def sweep_configs(weight: float = 1.0, with_baseline: bool = False) -> list[DiceConfig]:
    configs = table_configs(weight)
    if with_baseline:
        configs = [DiceConfig(alpha_r=1), DiceConfig(alpha_r=0)] + configs
    return configs


def _config_rows(config, problem, rho, tolerance):
    sol, _ = closed_form_solution(config, problem)
    expected = unbiasedness_table(config)
    return [SweepRow(config, name, est, rho, tolerance, exp) for name, est, exp in zip(ESTIMATORS, estimates(sol, problem), expected)]


def theorem2_sweep(problem: Problem, tolerance: float = 1e-6, with_baseline: bool = False, weight: float = 1.0, max_workers: int | None = None) -> list[SweepRow]:
    """Closed-form solution of every one-sided row, read out by all three estimators.

    Rows are computed concurrently and returned in configuration order.
    """
    check_separating(problem)
    rho = problem.target_value()
    configs = sweep_configs(weight, with_baseline)
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        chunks = list(pool.map(lambda c: _config_rows(c, problem, rho, tolerance), configs))
    return [row for chunk in chunks for row in chunk]


def theorem2_sweep_dataset(
    mdp: TabularMdp, target: Policy, behavior: Policy, *, n_trajectories: int = 100, horizon: int = DEFAULT_HORIZON,
    n_seeds: int = 10, seed: int = 0, tolerance: float = 1e-6, with_baseline: bool = False, weight: float = 1.0,
) -> list[SweepRow]:
    """Plug-in closed forms on ``n_seeds`` datasets; a cell is unbiased when |mean - rho| < 3 standard errors."""
    truth = exact_problem(mdp, target, behavior, horizon)
    check_separating(truth)
    rho = truth.target_value()
    configs = sweep_configs(weight, with_baseline)
    per_seed = np.zeros((n_seeds, len(configs), 3))
    for i in range(n_seeds):
        ds = collect(mdp, behavior, n_trajectories, horizon, rng_seed=seed + i)
        problem = Problem.from_dataset(mdp, target, ds)
        for j, c in enumerate(configs):
            sol, _ = closed_form_solution(c, problem)
            per_seed[i, j] = estimates(sol, problem)
    mean = per_seed.mean(axis=0)
    se = per_seed.std(axis=0, ddof=1) / math.sqrt(n_seeds) if n_seeds > 1 else np.zeros_like(mean)
    rows = []
    for j, c in enumerate(configs):
        for k, (name, exp) in enumerate(zip(ESTIMATORS, unbiasedness_table(c))):
            rows.append(SweepRow(c, name, float(mean[j, k]), rho, tolerance, exp, float(se[j, k])))
    return rows


def write_sweep(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_HEADER)
        for row in rows:
            w.writerow(row.as_list())


# --- reward robustness --------------------------------------------------------

ROBUST_CONFIG = DiceConfig(alpha_q=0.0, alpha_zeta=1.0, alpha_r=1)
TRANSFORMS = ("scale:10", "scale:100", "shift:5", "shift:10", "exp")


@dataclass(frozen=True)
class RewardTransform:
    kind: str
    amount: float = 0.0

    @classmethod
    def parse(cls, text: str) -> "RewardTransform":
        if text == "exp":
            return cls("exp")
        kind, _, amount = text.partition(":")
        try:
            value = float(amount)
        except ValueError:
            value = math.nan
        if kind not in ("scale", "shift") or not math.isfinite(value) or (kind == "scale" and value == 0):
            raise InvalidArgumentError(f"transform must be scale:C (C != 0), shift:B or exp, got {text!r}")
        return cls(kind, value)

    def __str__(self):
        return "exp" if self.kind == "exp" else f"{self.kind}:{self.amount:g}"

    def apply(self, reward):
        if self.kind == "scale":
            return self.amount * reward
        if self.kind == "shift":
            return reward + self.amount
        return np.exp(reward)

    def invert(self, value: float) -> float:
        """Map a value estimate back to the original reward scale; exp has no such map and is left as is."""
        if self.kind == "scale":
            return value / self.amount
        if self.kind == "shift":
            return value - self.amount
        return value


@dataclass(frozen=True)
class RobustnessRow:
    transform: str
    estimator: str
    estimate: float
    back_transformed: float
    reference_estimate: float
    true_rho: float

    @property
    def dev_reference(self) -> float:
        return abs(self.back_transformed - self.reference_estimate)

    @property
    def dev_truth(self) -> float:
        return abs(self.back_transformed - self.true_rho)

    def as_list(self):
        return [self.transform, self.estimator, repr(self.estimate), repr(self.back_transformed),
                repr(self.reference_estimate), repr(self.true_rho), repr(self.dev_reference), repr(self.dev_truth)]


def reward_robustness(problem: Problem, transform: str | RewardTransform, config: DiceConfig = ROBUST_CONFIG) -> list[RobustnessRow]:
    """Solve exactly under a transformed reward and compare each estimator with its untransformed counterpart.

    For shift and scale the reference is the same estimator without the
    transform and ``true_rho`` is the original value. For exp everything is
    compared in transformed space.
    """
    t = transform if isinstance(transform, RewardTransform) else RewardTransform.parse(transform)
    moved = problem.with_reward(t.apply(problem.reward))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        sol, _ = closed_form_solution(config, moved)
    est = estimates(sol, moved)
    if t.kind == "exp":
        ref_problem = moved
        ref = est
    else:
        ref_problem = problem
        ref = estimates(closed_form_solution(config, problem)[0], problem)
    rho = ref_problem.target_value()
    return [
        RobustnessRow(str(t), name, e, t.invert(e), r, rho)
        for name, e, r in zip(ESTIMATORS, est, ref)
    ]


def write_robustness(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ROBUSTNESS_HEADER)
        for row in rows:
            w.writerow(row.as_list())
