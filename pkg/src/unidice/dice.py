"""The regularized Lagrangian, its three value estimators and closed-form saddle points.

The objective, maximized over zeta (>= 0 under positivity) and minimized over Q
and lambda (when normalization is on), is

    (1 - gamma) E_{mu0 pi}[Q] + lambda
      + E_{d^D}[zeta (alpha_R R + gamma P^pi Q - Q - lambda)]
      + alpha_Q E_{d^D}[f1(Q)] - alpha_zeta E_{d^D}[f2(zeta)].

Every expectation is evaluated through a ``Problem``, so the same code serves
exact population quantities and plug-in dataset quantities.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.optimize import nnls

from .convex import HALF_SQUARE, ConvexFn, get_convex_fn
from .errors import (
    AssumptionViolationError,
    BiasedConfigWarning,
    InvalidArgumentError,
    UnsupportedConfigError,
    ValidationError,
)
from .problem import Problem

UNBIASED = "unbiased"
BIASED = "biased"


@dataclass(frozen=True)
class DiceConfig:
    alpha_q: float = 0.0
    alpha_zeta: float = 0.0
    alpha_r: int = 1
    positivity: bool = False
    normalization: bool = False
    f1: ConvexFn = HALF_SQUARE
    f2: ConvexFn = HALF_SQUARE

    def __post_init__(self):
        if self.alpha_r not in (0, 1):
            raise InvalidArgumentError(f"alpha_r must be 0 or 1, got {self.alpha_r!r}")
        if self.alpha_q < 0 or self.alpha_zeta < 0:
            raise InvalidArgumentError("regularization weights must be nonnegative")
        object.__setattr__(self, "alpha_q", float(self.alpha_q))
        object.__setattr__(self, "alpha_zeta", float(self.alpha_zeta))
        object.__setattr__(self, "alpha_r", int(self.alpha_r))

    @property
    def case(self) -> str | None:
        """Row label of the closed-form table: 'baseline', 'i'..'viii', or None if both regularizers are on."""
        if self.alpha_q > 0 and self.alpha_zeta > 0:
            return None
        if self.alpha_q == 0 and self.alpha_zeta == 0:
            return "baseline"
        offset = 0 if self.alpha_q > 0 else 4
        idx = offset + (0 if self.alpha_r == 1 else 2) + (1 if self.positivity else 0)
        return ("i", "ii", "iii", "iv", "v", "vi", "vii", "viii")[idx]

    def label(self) -> str:
        return (
            f"aQ={self.alpha_q:g},aZ={self.alpha_zeta:g},aR={self.alpha_r},"
            f"{'zeta>=0' if self.positivity else 'zeta_free'},{'lambda' if self.normalization else 'no_lambda'}"
        )

    def to_dict(self) -> dict:
        return {
            "alpha_q": self.alpha_q,
            "alpha_zeta": self.alpha_zeta,
            "alpha_r": self.alpha_r,
            "positivity": self.positivity,
            "normalization": self.normalization,
            "f1": self.f1.name,
            "f2": self.f2.name,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "DiceConfig":
        if not isinstance(obj, dict):
            raise ValidationError("config must be a JSON object")
        known = {"alpha_q", "alpha_zeta", "alpha_r", "positivity", "normalization", "f1", "f2"}
        extra = set(obj) - known
        if extra:
            raise ValidationError(f"config: unknown keys {sorted(extra)}")
        kw = dict(obj)
        try:
            for k in ("alpha_q", "alpha_zeta"):
                if k in kw:
                    kw[k] = float(kw[k])
            if "alpha_r" in kw:
                if kw["alpha_r"] not in (0, 1):
                    raise ValidationError(f"config.alpha_r: must be 0 or 1, got {kw['alpha_r']!r}")
                kw["alpha_r"] = int(kw["alpha_r"])
            for k in ("positivity", "normalization"):
                if k in kw and not isinstance(kw[k], bool):
                    raise ValidationError(f"config.{k}: expected true/false, got {kw[k]!r}")
            for k in ("f1", "f2"):
                if k in kw:
                    kw[k] = get_convex_fn(kw[k])
            return cls(**kw)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ValidationError(f"config: {exc}") from exc


NAMED_CONFIGS = {
    "DualDICE": dict(alpha_q=0, alpha_zeta=1, alpha_r=0, positivity=False, normalization=False),
    "GenDICE": dict(alpha_q=1, alpha_zeta=0, alpha_r=0, positivity=True, normalization=True),
    "GradientDICE": dict(alpha_q=1, alpha_zeta=0, alpha_r=0, positivity=False, normalization=True),
    "MWL": dict(alpha_q=0, alpha_zeta=0, alpha_r=0, positivity=False, normalization=False),
    "DR-MWQL": dict(alpha_q=0, alpha_zeta=0, alpha_r=1, positivity=False, normalization=False),
    "AlgaeQ": dict(alpha_q=0, alpha_zeta=1, alpha_r=1, positivity=False, normalization=False),
    "BestDICE": dict(alpha_q=0, alpha_zeta=1, alpha_r=1, positivity=True, normalization=True),
}


def named_config(name: str) -> DiceConfig:
    try:
        return DiceConfig(**NAMED_CONFIGS[name])
    except KeyError:
        raise InvalidArgumentError(f"unknown estimator {name!r}; known: {', '.join(NAMED_CONFIGS)}") from None


def table_configs(weight: float = 1.0, normalization: bool = False) -> list[DiceConfig]:
    """The eight one-sided regularization rows, in the order i..viii."""
    rows = []
    for aq, az in ((weight, 0.0), (0.0, weight)):
        for ar in (1, 0):
            for pos in (False, True):
                rows.append(DiceConfig(aq, az, ar, pos, normalization))
    return rows


@dataclass(frozen=True)
class Solution:
    q: np.ndarray
    zeta: np.ndarray
    lam: float = 0.0
    q_weights: np.ndarray | None = field(default=None, compare=False)
    zeta_weights: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        q = np.asarray(self.q, float).reshape(-1)
        z = np.asarray(self.zeta, float).reshape(-1)
        if q.shape != z.shape:
            raise InvalidArgumentError("q and zeta must live on the same pairs")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "zeta", z)
        object.__setattr__(self, "lam", float(self.lam))

    def canonical(self, gamma: float) -> "Solution":
        """Move lambda into Q: (Q + lambda/(1-gamma), lambda = 0).

        This is an exact symmetry of the objective whenever alpha_Q = 0, where
        the saddle set contains the whole line along this direction.
        """
        return Solution(self.q + self.lam / (1.0 - gamma), self.zeta, 0.0)


class EstimateTriple(NamedTuple):
    rho_q: float
    rho_zeta: float
    rho_lagrangian: float


class Classification(NamedTuple):
    primal: str
    dual: str
    lagrangian: str


def _check_shapes(problem: Problem, sol: Solution):
    if sol.q.shape != (problem.n_pairs,):
        raise InvalidArgumentError(f"solution has {sol.q.size} pairs, problem has {problem.n_pairs}")


def _effective_lam(config: DiceConfig, sol: Solution) -> float:
    return sol.lam if config.normalization else 0.0


def lagrangian_value(config: DiceConfig, problem: Problem, sol: Solution) -> float:
    _check_shapes(problem, sol)
    if config.positivity and np.any(sol.zeta < 0):
        raise InvalidArgumentError("positivity is on but zeta has negative entries")
    g = problem.gamma
    dD = problem.d_data
    q, z = sol.q, sol.zeta
    lam = _effective_lam(config, sol)
    bellman = config.alpha_r * problem.reward + g * problem.next_op @ q - q - lam
    val = (1.0 - g) * problem.init @ q + lam + dD @ (z * bellman)
    if config.alpha_q:
        val += config.alpha_q * dD @ config.f1.f(q)
    if config.alpha_zeta:
        val -= config.alpha_zeta * dD @ config.f2.f(z)
    return float(val)


def lagrangian_gradients(config: DiceConfig, problem: Problem, sol: Solution):
    """(dL/dQ, dL/dzeta, dL/dlambda) over pair tables; dL/dlambda is 0 without normalization."""
    g = problem.gamma
    dD = problem.d_data
    P = problem.next_op
    q, z = sol.q, sol.zeta
    lam = _effective_lam(config, sol)
    dz = dD * z
    grad_q = (1.0 - g) * problem.init + g * P.T @ dz - dz
    if config.alpha_q:
        grad_q = grad_q + config.alpha_q * dD * config.f1.f_prime(q)
    grad_zeta = dD * (config.alpha_r * problem.reward + g * P @ q - q - lam)
    if config.alpha_zeta:
        grad_zeta = grad_zeta - config.alpha_zeta * dD * config.f2.f_prime(z)
    grad_lam = 1.0 - dD @ z if config.normalization else 0.0
    return grad_q, grad_zeta, float(grad_lam)


def estimate_primal(sol: Solution, problem: Problem) -> float:
    return float((1.0 - problem.gamma) * problem.init @ sol.q + sol.lam)


def estimate_dual(sol: Solution, problem: Problem) -> float:
    return float(problem.d_data @ (sol.zeta * problem.reward))


def estimate_lagrangian(sol: Solution, problem: Problem) -> float:
    """Primal + dual + E_{d^D}[zeta (gamma Q' - Q - lambda)], always with the true reward."""
    residual = problem.gamma * problem.next_op @ sol.q - sol.q - sol.lam
    return estimate_primal(sol, problem) + estimate_dual(sol, problem) + float(problem.d_data @ (sol.zeta * residual))


def estimates(sol: Solution, problem: Problem) -> EstimateTriple:
    return EstimateTriple(estimate_primal(sol, problem), estimate_dual(sol, problem), estimate_lagrangian(sol, problem))


# --- closed-form saddle points ------------------------------------------------


def _require_full_support(problem: Problem, case: str):
    if np.any(problem.d_data <= 0):
        raise AssumptionViolationError(
            f"case {case} needs d^D > 0 on every pair; otherwise the primal-regularized problem has no minimizer in Q"
        )


def _solve(A, b):
    return np.linalg.solve(A, b)


def positive_part_relaxation(config: DiceConfig, problem: Problem) -> Solution:
    """Transcription of the positive-part formulas for primal regularization with alpha_R = 1, zeta >= 0.

    Writes e = (I - gamma P_*)(d^D zeta) / d^D and keeps e = (alpha_Q f1'(Q^pi) + (1-gamma) mu0 pi / d^D)_+.
    Requiring e >= 0 is stronger than zeta >= 0, so this is the saddle point
    only while the positive part is inactive; ``closed_form_solution`` uses the
    exact constrained maximizer instead.
    """
    _require_full_support(problem, "ii")
    g, dD = problem.gamma, problem.d_data
    n = problem.n_pairs
    c0 = (1.0 - g) * problem.init / dD
    e = np.maximum(config.alpha_q * config.f1.f_prime(problem.target_q()) + c0, 0.0)
    zeta = _solve(np.eye(n) - g * problem.next_op.T, dD * e) / dD
    q = config.f1.f_conj_prime((e - c0) / config.alpha_q)
    return Solution(q, zeta, 0.0)


def _positive_primal_regularized(config: DiceConfig, problem: Problem) -> Solution:
    """max_{zeta >= 0} min_Q of the alpha_Q > 0 Lagrangian, by nonnegative least squares.

    Minimizing out Q leaves a concave quadratic in zeta when f1* is a centered
    quadratic, so the constrained maximizer is an NNLS problem.
    """
    kappa = config.f1.conj_curvature
    if kappa is None:
        raise UnsupportedConfigError(f"positivity with primal regularization needs a quadratic conjugate; {config.f1.name} is not")
    g, dD, aq = problem.gamma, problem.d_data, config.alpha_q
    n = problem.n_pairs
    B = (np.eye(n) - g * problem.next_op.T) * dD[None, :]  # zeta -> (I - gamma P_*)(d^D zeta)
    W = np.sqrt(kappa / (aq * dD))
    M = W[:, None] * B
    t = W * (1.0 - g) * problem.init
    lin = config.alpha_r * dD * problem.reward
    target = t + np.linalg.solve(M.T, lin)
    zeta, _ = nnls(M, target, maxiter=50 * n)
    arg = (B @ zeta - (1.0 - g) * problem.init) / (aq * dD)
    return Solution(config.f1.f_conj_prime(arg), zeta, 0.0)


def closed_form_solution(config: DiceConfig, problem: Problem):
    """Saddle point and saddle value for the regularized Lagrangian.

    Returns ``(Solution, value)``, or ``None`` with a ``BiasedConfigWarning``
    for primal regularization with reward and normalization, which has no
    unbiased saddle to report.
    """
    case = config.case
    if case is None:
        raise UnsupportedConfigError("no closed form when both alpha_q and alpha_zeta are positive")
    g, dD = problem.gamma, problem.d_data
    n = problem.n_pairs
    P = problem.next_op
    aq, az, ar = config.alpha_q, config.alpha_zeta, config.alpha_r

    if case in ("i", "ii") and config.normalization:
        warnings.warn(
            f"{config.label()}: the primal-regularized saddle point never satisfies E_dD[zeta] = 1, "
            "so adding the normalization constraint biases every estimator; no closed form returned",
            BiasedConfigWarning,
            stacklevel=2,
        )
        return None

    if case == "baseline":
        q_pi = problem.target_q()
        sol = Solution(ar * q_pi, problem.correction_ratio(), 0.0)
        value = ar * problem.target_value()
    elif case == "i":
        _require_full_support(problem, case)
        q_pi = problem.target_q()
        shift = _solve(np.eye(n) - g * P.T, dD * config.f1.f_prime(q_pi)) / dD
        sol = Solution(q_pi, problem.correction_ratio() + aq * shift, 0.0)
        value = ar * (1.0 - g) * problem.init @ q_pi + aq * dD @ config.f1.f(q_pi)
    elif case == "ii":
        _require_full_support(problem, case)
        sol = _positive_primal_regularized(config, problem)
        value = lagrangian_value(config, problem, sol)
    elif case in ("iii", "iv"):
        _require_full_support(problem, case)
        q0 = float(config.f1.f_conj_prime(0.0))
        # stationarity in zeta (with lambda when present) pins lambda to -(1 - gamma) q0
        lam = -(1.0 - g) * q0 if config.normalization else 0.0
        sol = Solution(np.full(n, q0), problem.correction_ratio(), lam)
        value = -aq * float(config.f1.f_conj(0.0))
    else:  # v..viii
        ratio = problem.correction_ratio()
        nu = az * np.where(dD > 0, config.f2.f_prime(ratio), 0.0)
        q = _solve(np.eye(n) - g * P, ar * problem.reward - nu)
        sol = Solution(q, ratio, 0.0)
        value = ar * problem.target_value() - az * f_divergence(config.f2, problem.target_visitation(), dD)
    return sol, float(value)


def f_divergence(f: ConvexFn, p: np.ndarray, q: np.ndarray) -> float:
    """E_q[f(p / q)] over the support of q."""
    m = q > 0
    return float(q[m] @ f.f(p[m] / q[m]))


def unbiasedness_table(config: DiceConfig) -> Classification:
    """Which of the primal, dual and Lagrangian estimates are unbiased at the exact saddle point."""
    case = config.case
    if case is None:
        raise UnsupportedConfigError("classification covers one-sided regularization only")
    U, B = UNBIASED, BIASED
    if case == "baseline":
        return Classification(U if config.alpha_r == 1 else B, U, U)
    if case == "i":
        if config.normalization:
            warnings.warn(
                f"{config.label()}: normalization makes the primal-regularized solution biased",
                BiasedConfigWarning,
                stacklevel=2,
            )
            return Classification(B, B, B)
        return Classification(U, B, U)
    if case == "ii":
        return Classification(B, B, B)
    return Classification(B, U, U)
