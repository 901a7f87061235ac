"""Off-policy evaluation through a regularized Lagrangian over Q-values and correction ratios."""
from .dice import (
    DiceConfig,
    EstimateTriple,
    Solution,
    closed_form_solution,
    estimate_dual,
    estimate_lagrangian,
    estimate_primal,
    estimates,
    lagrangian_gradients,
    lagrangian_value,
    named_config,
    unbiasedness_table,
)
from .exact import exact_solution, policy_value, solve_d, solve_q, solve_undiscounted
from .mdp import Policy, TabularMdp
from .optim import Parametrization, SgdaSettings, TrainingTrace, sgda, unconstrained_dual, unconstrained_primal
from .problem import Problem

__all__ = [
    "DiceConfig", "EstimateTriple", "Solution", "closed_form_solution", "estimate_dual", "estimate_lagrangian",
    "estimate_primal", "estimates", "lagrangian_gradients", "lagrangian_value", "named_config", "unbiasedness_table",
    "exact_solution", "policy_value", "solve_d", "solve_q", "solve_undiscounted", "Policy", "TabularMdp",
    "Parametrization", "SgdaSettings", "TrainingTrace", "sgda", "unconstrained_dual", "unconstrained_primal", "Problem",
]
