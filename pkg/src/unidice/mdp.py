"""Finite MDPs, policies, the policy transition operator and rollouts.

State-action pairs are flattened row-major: pair index = s * n_actions + a.
Every vector or matrix over S x A in this package uses that layout.
"""
from __future__ import annotations

import bisect
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidArgumentError, ValidationError

SUM_TOL = 1e-12

# grid actions
LEFT, RIGHT, UP, DOWN = range(4)


def _as_rng(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def _frozen(arr, dtype=float):
    arr = np.array(arr, dtype=dtype)
    arr.setflags(write=False)
    return arr


def _check_distribution_rows(arr, name):
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name}: non-finite entry")
    neg = np.argwhere(arr < 0)
    if len(neg):
        idx = "][".join(str(i) for i in neg[0])
        raise ValidationError(f"{name}[{idx}]: negative probability {arr[tuple(neg[0])]!r}")
    sums = arr.sum(axis=-1)
    bad = np.argwhere(np.abs(sums - 1.0) > SUM_TOL)
    if len(bad):
        idx = "".join(f"[{i}]" for i in bad[0])
        raise ValidationError(f"{name}{idx}: row sums to {sums[tuple(bad[0])]!r}, expected 1")


@dataclass(frozen=True)
class TabularMdp:
    transition: np.ndarray  # T[s, a, s']
    reward: np.ndarray  # R[s, a]
    mu0: np.ndarray
    gamma: float

    def __post_init__(self):
        T = _frozen(self.transition)
        R = _frozen(self.reward)
        mu0 = _frozen(self.mu0)
        if T.ndim != 3 or T.shape[0] != T.shape[2]:
            raise ValidationError(f"transition: expected shape (S, A, S), got {T.shape}")
        if R.shape != T.shape[:2]:
            raise ValidationError(f"reward: expected shape {T.shape[:2]}, got {R.shape}")
        if mu0.shape != (T.shape[0],):
            raise ValidationError(f"mu0: expected shape ({T.shape[0]},), got {mu0.shape}")
        if not np.all(np.isfinite(R)):
            raise ValidationError("reward: non-finite entry")
        _check_distribution_rows(T, "transition")
        _check_distribution_rows(mu0, "mu0")
        gamma = float(self.gamma)
        if not 0.0 <= gamma <= 1.0:
            raise ValidationError(f"gamma: {gamma} not in [0, 1]")
        object.__setattr__(self, "transition", T)
        object.__setattr__(self, "reward", R)
        object.__setattr__(self, "mu0", mu0)
        object.__setattr__(self, "gamma", gamma)

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]

    @property
    def n_pairs(self) -> int:
        return self.n_states * self.n_actions

    def reward_vector(self) -> np.ndarray:
        return self.reward.reshape(-1).copy()

    def with_reward(self, reward) -> "TabularMdp":
        return TabularMdp(self.transition, np.asarray(reward, float).reshape(self.reward.shape), self.mu0, self.gamma)

    def with_gamma(self, gamma: float) -> "TabularMdp":
        return TabularMdp(self.transition, self.reward, self.mu0, gamma)

    def to_dict(self) -> dict:
        return {
            "n_states": self.n_states,
            "n_actions": self.n_actions,
            "transition": self.transition.tolist(),
            "reward": self.reward.tolist(),
            "mu0": self.mu0.tolist(),
            "gamma": self.gamma,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "TabularMdp":
        missing = [k for k in ("n_states", "n_actions", "transition", "reward", "mu0", "gamma") if k not in obj]
        if missing:
            raise ValidationError(f"MDP file missing keys: {', '.join(missing)}")
        try:
            mdp = cls(obj["transition"], obj["reward"], obj["mu0"], obj["gamma"])
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ValidationError(f"MDP file: malformed arrays ({exc})") from exc
        if mdp.n_states != obj["n_states"] or mdp.n_actions != obj["n_actions"]:
            raise ValidationError(
                f"n_states/n_actions ({obj['n_states']}, {obj['n_actions']}) disagree with "
                f"transition shape {mdp.transition.shape}"
            )
        return mdp


@dataclass(frozen=True)
class Policy:
    probs: np.ndarray  # pi[s, a]

    def __post_init__(self):
        p = _frozen(self.probs)
        if p.ndim != 2:
            raise ValidationError(f"policy: expected a 2-level array, got shape {p.shape}")
        _check_distribution_rows(p, "policy")
        object.__setattr__(self, "probs", p)

    @property
    def n_states(self) -> int:
        return self.probs.shape[0]

    @property
    def n_actions(self) -> int:
        return self.probs.shape[1]

    @classmethod
    def uniform(cls, n_states: int, n_actions: int) -> "Policy":
        return cls(np.full((n_states, n_actions), 1.0 / n_actions))

    @classmethod
    def deterministic(cls, actions, n_actions: int) -> "Policy":
        actions = np.asarray(actions, int)
        probs = np.zeros((len(actions), n_actions))
        probs[np.arange(len(actions)), actions] = 1.0
        return cls(probs)


@dataclass(frozen=True)
class Trajectory:
    initial_state: int
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray

    def __len__(self):
        return len(self.states)

    def steps(self):
        return zip(self.states.tolist(), self.actions.tolist(), self.rewards.tolist(), self.next_states.tolist())


def _check_compatible(mdp: TabularMdp, pi: Policy):
    if pi.probs.shape != (mdp.n_states, mdp.n_actions):
        raise InvalidArgumentError(
            f"policy shape {pi.probs.shape} does not match MDP ({mdp.n_states}, {mdp.n_actions})"
        )


def policy_operator(mdp: TabularMdp, pi: Policy) -> np.ndarray:
    """Matrix of P^pi: entry [(s,a), (s',a')] = T(s'|s,a) * pi(a'|s')."""
    _check_compatible(mdp, pi)
    n = mdp.n_pairs
    return np.einsum("ijk,kl->ijkl", mdp.transition, pi.probs).reshape(n, n)


def adjoint_operator(mdp: TabularMdp, pi: Policy) -> np.ndarray:
    """P^pi_*, the transpose of ``policy_operator``."""
    return policy_operator(mdp, pi).T


def initial_pair_distribution(mdp: TabularMdp, pi: Policy) -> np.ndarray:
    """mu0(s) * pi(a|s) flattened over pairs."""
    _check_compatible(mdp, pi)
    return (mdp.mu0[:, None] * pi.probs).reshape(-1)


def mix_uniform(pi: Policy, weight: float) -> Policy:
    if not 0.0 <= weight <= 1.0:
        raise InvalidArgumentError(f"mix weight {weight} not in [0, 1]")
    return Policy((1.0 - weight) * pi.probs + weight / pi.n_actions)


class _CategoricalTable:
    """Sample rows of a stochastic table with one uniform draw each, via bisect on cumsums."""

    def __init__(self, rows):
        rows = np.atleast_2d(rows)
        cum = np.cumsum(rows, axis=-1)
        cum[:, -1] = np.inf  # guards against cumsum ending at 1 - eps
        self._cum = [list(c) for c in cum]

    def draw(self, row: int, u: float) -> int:
        return bisect.bisect_right(self._cum[row], u)


def rollout(mdp: TabularMdp, pi: Policy, horizon: int, rng_seed=0) -> Trajectory:
    """Simulate ``horizon`` steps of ``pi`` starting from s0 ~ mu0."""
    if horizon < 1:
        raise InvalidArgumentError("horizon must be >= 1")
    _check_compatible(mdp, pi)
    rng = _as_rng(rng_seed)
    S, A = mdp.n_states, mdp.n_actions
    start = _CategoricalTable(mdp.mu0[None, :])
    act = _CategoricalTable(pi.probs)
    nxt = _CategoricalTable(mdp.transition.reshape(S * A, S))
    R = mdp.reward.tolist()
    u = rng.random((horizon, 2)).tolist()
    s = start.draw(0, float(rng.random()))
    s_init = s
    states = [0] * horizon
    actions = [0] * horizon
    rewards = [0.0] * horizon
    nexts = [0] * horizon
    for t in range(horizon):
        ua, us = u[t]
        a = act.draw(s, ua)
        s2 = nxt.draw(s * A + a, us)
        states[t], actions[t], rewards[t], nexts[t] = s, a, R[s][a], s2
        s = s2
    return Trajectory(
        s_init,
        np.array(states, dtype=np.int64),
        np.array(actions, dtype=np.int64),
        np.array(rewards, dtype=float),
        np.array(nexts, dtype=np.int64),
    )


def average_reward_rollout(mdp: TabularMdp, pi: Policy, horizon: int, rng_seed=0) -> float:
    return float(rollout(mdp, pi, horizon, rng_seed).rewards.mean())


def discounted_return(traj: Trajectory, gamma: float) -> float:
    """(1 - gamma) * sum_t gamma^t r_t, the normalized per-step value of one trajectory."""
    disc = gamma ** np.arange(len(traj))
    return float((1.0 - gamma) * np.dot(disc, traj.rewards))


# --- environment generators -------------------------------------------------


def grid_state(x: int, y: int, side: int) -> int:
    return x * side + y


def grid_coords(s: int, side: int) -> tuple[int, int]:
    return divmod(s, side)


def grid_reward(x, y, side):
    return np.exp(-0.2 * np.abs(x - (side - 1)) - 0.2 * np.abs(y - (side - 1)))


def build_grid(side: int = 10, target_explore: float = 0.1, behavior_explore: float = 0.7, gamma: float = 0.99):
    """side x side grid; the agent starts at (0, 0) and is rewarded near (side-1, side-1).

    Actions are left/right/up/down on (x, y), clamped at the walls. The reward
    of a step is assessed on the cell the action is taken from. Both policies
    mix the "right, then down" optimal policy with uniform exploration.
    """
    if side < 2:
        raise InvalidArgumentError(f"grid side must be >= 2, got {side}")
    for w in (target_explore, behavior_explore):
        if not 0.0 <= w <= 1.0:
            raise InvalidArgumentError(f"exploration weight {w} not in [0, 1]")
    S = side * side
    T = np.zeros((S, 4, S))
    R = np.zeros((S, 4))
    moves = {LEFT: (-1, 0), RIGHT: (1, 0), UP: (0, -1), DOWN: (0, 1)}
    optimal = np.zeros(S, dtype=int)
    for x in range(side):
        for y in range(side):
            s = grid_state(x, y, side)
            R[s, :] = grid_reward(x, y, side)
            for a, (dx, dy) in moves.items():
                nx = min(max(x + dx, 0), side - 1)
                ny = min(max(y + dy, 0), side - 1)
                T[s, a, grid_state(nx, ny, side)] = 1.0
            optimal[s] = RIGHT if x < side - 1 else DOWN
    mu0 = np.zeros(S)
    mu0[grid_state(0, 0, side)] = 1.0
    mdp = TabularMdp(T, R, mu0, gamma)
    greedy = Policy.deterministic(optimal, 4)
    return mdp, mix_uniform(greedy, target_explore), mix_uniform(greedy, behavior_explore)


def random_mdp(n_states: int, n_actions: int, gamma: float, rng=0, *, reward_low=0.0, reward_high=1.0) -> TabularMdp:
    """Dense Dirichlet transitions; every transition has full support, so any policy is ergodic."""
    rng = _as_rng(rng)
    T = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    R = rng.uniform(reward_low, reward_high, size=(n_states, n_actions))
    mu0 = rng.dirichlet(np.ones(n_states))
    return TabularMdp(T, R, mu0, gamma)


def random_policy(n_states: int, n_actions: int, rng=0) -> Policy:
    rng = _as_rng(rng)
    return Policy(rng.dirichlet(np.ones(n_actions), size=n_states))


def single_state_mdp(reward: float = 1.0, gamma: float = 0.5) -> TabularMdp:
    return TabularMdp([[[1.0]]], [[reward]], [1.0], gamma)


def chain_mdp(gamma: float = 0.5, rewards=(0.0, 1.0)) -> TabularMdp:
    """Two states, one action: 0 -> 1 -> 1, starting in 0."""
    T = [[[0.0, 1.0]], [[0.0, 1.0]]]
    return TabularMdp(T, [[rewards[0]], [rewards[1]]], [1.0, 0.0], gamma)


# --- file formats -----------------------------------------------------------


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc


def load_mdp(path) -> TabularMdp:
    obj = _read_json(path)
    if not isinstance(obj, dict):
        raise ValidationError(f"{path}: expected a JSON object")
    try:
        return TabularMdp.from_dict(obj)
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from exc


def save_mdp(mdp: TabularMdp, path) -> None:
    Path(path).write_text(json.dumps(mdp.to_dict()))


def load_policy(path, mdp: TabularMdp | None = None) -> Policy:
    obj = _read_json(path)
    try:
        pi = Policy(obj)
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{path}: policy must be a 2-level array ({exc})") from exc
    if mdp is not None and pi.probs.shape != (mdp.n_states, mdp.n_actions):
        raise ValidationError(f"{path}: policy shape {pi.probs.shape} does not match MDP")
    return pi


def save_policy(pi: Policy, path) -> None:
    Path(path).write_text(json.dumps(pi.probs.tolist()))
