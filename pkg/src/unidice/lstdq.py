"""LSTDQ with linear features as the linear-parametrization special case of the saddle point."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, RankDeficiencyError, ValidationError
from .problem import Problem

CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class FeatureMap:
    phi: np.ndarray  # (n_pairs, k)

    def __post_init__(self):
        phi = np.asarray(self.phi, float)
        if phi.ndim != 2 or phi.shape[1] < 1:
            raise InvalidArgumentError("features must be a 2-D array with k >= 1 columns")
        if not np.all(np.isfinite(phi)):
            raise InvalidArgumentError("features must be finite")
        phi = phi.copy()
        phi.setflags(write=False)
        object.__setattr__(self, "phi", phi)

    @property
    def dim(self) -> int:
        return self.phi.shape[1]

    @classmethod
    def one_hot(cls, n_pairs: int) -> "FeatureMap":
        return cls(np.eye(n_pairs))


def load_features(path, n_pairs: int | None = None) -> FeatureMap:
    try:
        with open(path) as fh:
            obj = json.load(fh)
        fm = FeatureMap(obj)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc
    except (InvalidArgumentError, TypeError, ValueError) as exc:
        raise ValidationError(f"{path}: features must be a 2-level numeric array ({exc})") from exc
    if n_pairs is not None and fm.phi.shape[0] != n_pairs:
        raise ValidationError(f"{path}: {fm.phi.shape[0]} feature rows, expected {n_pairs}")
    return fm


def lstdq_matrices(problem: Problem, features: FeatureMap):
    """Xi = Phi^T D (I - gamma P) Phi, b_r = Phi^T D R, b_0 = (1 - gamma) Phi^T mu0 pi.

    ``problem`` carries either population quantities or dataset plug-ins, so the
    same contraction gives the exact matrices or the sample averages.
    """
    phi = features.phi
    if phi.shape[0] != problem.n_pairs:
        raise InvalidArgumentError(f"features have {phi.shape[0]} rows, problem has {problem.n_pairs} pairs")
    dD = problem.d_data
    next_phi = problem.next_op @ phi
    xi = phi.T @ (dD[:, None] * (phi - problem.gamma * next_phi))
    b_r = phi.T @ (dD * problem.reward)
    b_0 = (1.0 - problem.gamma) * phi.T @ problem.init
    return xi, b_r, b_0


def lstdq_solve(problem: Problem, features: FeatureMap):
    """Weights (w, v): Xi w = b_r for Q = Phi w, and Xi^T v = b_0 for the dual weights."""
    xi, b_r, b_0 = lstdq_matrices(problem, features)
    cond = np.linalg.cond(xi)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        rank = np.linalg.matrix_rank(features.phi)
        raise RankDeficiencyError(
            f"Xi is singular (condition number {cond:.3g}); feature rank {rank} of {features.dim} columns"
        )
    w = np.linalg.lstsq(xi, b_r, rcond=None)[0]
    v = np.linalg.lstsq(xi.T, b_0, rcond=None)[0]
    return w, v, cond


def lstdq_estimate(problem: Problem, features: FeatureMap, route: str = "primal") -> float:
    """b_0^T w on the primal route, b_r^T v on the dual route; both equal b_0^T Xi^{-1} b_r."""
    if route not in ("primal", "dual"):
        raise InvalidArgumentError(f"route must be 'primal' or 'dual', got {route!r}")
    _, b_r, b_0 = lstdq_matrices(problem, features)
    w, v, _ = lstdq_solve(problem, features)
    return float(b_0 @ w) if route == "primal" else float(b_r @ v)
