"""Exact Q-values, visitations and policy values by dense linear solves."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    AssumptionViolationError,
    NumericalFailureError,
    UnderdeterminedSystemError,
    UnsupportedError,
)
from .mdp import Policy, TabularMdp, initial_pair_distribution, policy_operator

RESIDUAL_TOL = 1e-9
DUALITY_TOL = 1e-8
CLAMP_TOL = 1e-12
ERGODIC_TOL = 1e-8


@dataclass(frozen=True)
class ExactSolution:
    q_values: np.ndarray | None
    visitation: np.ndarray
    rho: float
    lambda_star: float | None = None

    def to_dict(self) -> dict:
        return {
            "q_values": None if self.q_values is None else self.q_values.tolist(),
            "visitation": self.visitation.tolist(),
            "rho": self.rho,
            "lambda_star": self.lambda_star,
        }


def _require_discounted(mdp):
    if mdp.gamma >= 1.0:
        raise UnsupportedError("gamma = 1 is not supported here; use solve_undiscounted")


def _solve(A, b):
    try:
        return np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailureError(f"singular Bellman system: {exc}") from exc


def _scale(v):
    return max(1.0, float(np.max(np.abs(v))))


def solve_q_matrix(P: np.ndarray, reward: np.ndarray, gamma: float) -> np.ndarray:
    """Q = (I - gamma P)^{-1} R for an explicit pair-transition matrix."""
    n = len(reward)
    q = _solve(np.eye(n) - gamma * P, reward)
    resid = np.max(np.abs(q - reward - gamma * P @ q), initial=0.0)
    if resid > RESIDUAL_TOL * _scale(q):
        raise NumericalFailureError(f"Q Bellman residual {resid:.3g} exceeds tolerance")
    return q


def solve_d_matrix(P: np.ndarray, init: np.ndarray, gamma: float) -> np.ndarray:
    """d = (I - gamma P^T)^{-1} (1 - gamma) init, clamped and renormalized."""
    n = len(init)
    d = _solve(np.eye(n) - gamma * P.T, (1.0 - gamma) * init)
    resid = np.max(np.abs(d - (1.0 - gamma) * init - gamma * P.T @ d), initial=0.0)
    if resid > RESIDUAL_TOL:
        raise NumericalFailureError(f"visitation fixed-point residual {resid:.3g} exceeds tolerance")
    if np.any(d < -CLAMP_TOL):
        raise NumericalFailureError(f"visitation has negative entry {d.min():.3g}")
    d = np.clip(d, 0.0, None)
    total = d.sum()
    # an empirical operator with absorbing-zero rows leaks mass; only renormalize noise
    if abs(total - 1.0) < RESIDUAL_TOL:
        d = d / total
    return d


def solve_q(mdp: TabularMdp, pi: Policy) -> np.ndarray:
    _require_discounted(mdp)
    return solve_q_matrix(policy_operator(mdp, pi), mdp.reward_vector(), mdp.gamma)


def solve_d(mdp: TabularMdp, pi: Policy) -> np.ndarray:
    _require_discounted(mdp)
    return solve_d_matrix(policy_operator(mdp, pi), initial_pair_distribution(mdp, pi), mdp.gamma)


def policy_value_both(mdp: TabularMdp, pi: Policy) -> tuple[float, float]:
    """(primal form (1-gamma) E_{mu0 pi}[Q], dual form E_d[R])."""
    q = solve_q(mdp, pi)
    d = solve_d(mdp, pi)
    primal = float((1.0 - mdp.gamma) * initial_pair_distribution(mdp, pi) @ q)
    dual = float(d @ mdp.reward_vector())
    return primal, dual


def policy_value(mdp: TabularMdp, pi: Policy) -> float:
    primal, dual = policy_value_both(mdp, pi)
    if abs(primal - dual) > DUALITY_TOL * _scale(mdp.reward):
        raise NumericalFailureError(f"primal value {primal!r} and dual value {dual!r} disagree")
    return dual


def stationary_null_dimension(P: np.ndarray, tol: float = ERGODIC_TOL) -> int:
    """Dimension of {d : d = P^T d}, the number of recurrent classes of the pair chain."""
    n = P.shape[0]
    sv = np.linalg.svd(np.eye(n) - P.T, compute_uv=False)
    return int(np.sum(sv <= tol))


def solve_undiscounted(mdp: TabularMdp, pi: Policy, normalization: bool = True) -> ExactSolution:
    """Average-reward visitation d = P^pi_* d with sum(d) = 1, and rho = <d, R>.

    Without the normalization row the system d = P^pi_* d is always
    under-determined (every multiple of d^pi solves it), which raises
    ``UnderdeterminedSystemError``.
    """
    P = policy_operator(mdp, pi)
    n = P.shape[0]
    null_dim = stationary_null_dimension(P)
    if not normalization:
        raise UnderdeterminedSystemError(
            f"d = P^pi_* d has a solution space of dimension {max(null_dim, 1)} "
            "without the normalization constraint sum(d) = 1"
        )
    if null_dim != 1:
        raise AssumptionViolationError(
            f"ergodicity assumption violated: stationary distributions span {null_dim} dimensions"
        )
    A = np.vstack([np.eye(n) - P.T, np.ones((1, n))])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    d, *_ = np.linalg.lstsq(A, b, rcond=None)
    resid = np.max(np.abs(A @ d - b))
    if resid > RESIDUAL_TOL:
        raise NumericalFailureError(f"stationary residual {resid:.3g} exceeds tolerance")
    d = np.clip(d, 0.0, None)
    d = d / d.sum()
    R = mdp.reward_vector()
    rho = float(d @ R)
    # lambda* = rho must make Q = R + P Q - lambda consistent for some Q
    q, *_ = np.linalg.lstsq(np.eye(n) - P, R - rho, rcond=None)
    if np.max(np.abs((np.eye(n) - P) @ q - (R - rho))) > RESIDUAL_TOL * _scale(R):
        raise NumericalFailureError("undiscounted primal constraint inconsistent at lambda = rho")
    return ExactSolution(None, d, rho, rho)


def exact_solution(mdp: TabularMdp, pi: Policy) -> ExactSolution:
    if mdp.gamma >= 1.0:
        return solve_undiscounted(mdp, pi)
    q = solve_q(mdp, pi)
    d = solve_d(mdp, pi)
    return ExactSolution(q, d, policy_value(mdp, pi))
