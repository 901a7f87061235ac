"""Population or empirical quantities that every estimator and solver consumes.

Exact mode uses the true operator P^pi, mu0 (x) pi and a given d^D. Dataset
mode replaces them by their plug-in versions from the samples, with a'
marginalized exactly under pi, so that every expectation in the regularized
Lagrangian becomes the corresponding sample average.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .data import OfflineDataset, empirical_dD
from .errors import AssumptionViolationError, InvalidArgumentError
from .exact import solve_d_matrix, solve_q_matrix
from .mdp import Policy, TabularMdp, initial_pair_distribution, policy_operator

SUPPORT_TOL = 1e-14


@dataclass(frozen=True)
class Transitions:
    """Aggregated (pair, next_state) triples with probability weights summing to 1."""

    pair: np.ndarray
    next_state: np.ndarray
    weight: np.ndarray


@dataclass(frozen=True)
class Problem:
    n_states: int
    n_actions: int
    gamma: float
    policy: Policy
    init: np.ndarray  # (mu0 x pi) over pairs, or its empirical version
    d_data: np.ndarray  # d^D over pairs
    next_op: np.ndarray  # P^pi, or the empirical conditional next-pair operator
    reward: np.ndarray  # R over pairs
    transitions: Transitions
    mode: str = "exact"
    dataset: OfflineDataset | None = None

    @property
    def n_pairs(self) -> int:
        return self.n_states * self.n_actions

    @classmethod
    def exact(cls, mdp: TabularMdp, pi: Policy, d_data) -> "Problem":
        d_data = np.asarray(d_data, float).reshape(-1)
        if d_data.shape != (mdp.n_pairs,):
            raise InvalidArgumentError(f"d_data must have {mdp.n_pairs} entries")
        if np.any(d_data < 0) or abs(d_data.sum() - 1.0) > 1e-9:
            raise InvalidArgumentError("d_data must be a distribution over state-action pairs")
        pair, nxt = np.nonzero(mdp.transition.reshape(mdp.n_pairs, mdp.n_states))
        w = d_data[pair] * mdp.transition.reshape(mdp.n_pairs, mdp.n_states)[pair, nxt]
        keep = w > 0
        return cls(
            mdp.n_states,
            mdp.n_actions,
            mdp.gamma,
            pi,
            initial_pair_distribution(mdp, pi),
            d_data,
            policy_operator(mdp, pi),
            mdp.reward_vector(),
            Transitions(pair[keep], nxt[keep], w[keep]),
        )

    @classmethod
    def from_dataset(cls, mdp: TabularMdp, pi: Policy, dataset: OfflineDataset) -> "Problem":
        """Plug-in problem; only sizes and gamma are taken from ``mdp``."""
        S, A = mdp.n_states, mdp.n_actions
        if (dataset.n_states, dataset.n_actions) != (S, A):
            raise InvalidArgumentError("dataset and MDP sizes differ")
        n = S * A
        N = len(dataset)
        d_data = empirical_dD(dataset)
        s0_freq = np.bincount(dataset.s0, minlength=S) / N
        init = (s0_freq[:, None] * pi.probs).reshape(-1)
        pairs = dataset.pairs
        trip = np.bincount(pairs * S + dataset.s_next, minlength=n * S).reshape(n, S) / N
        counts = d_data[:, None]
        cond_next = np.divide(trip, counts, out=np.zeros_like(trip), where=counts > 0)
        next_op = np.einsum("ik,kl->ikl", cond_next, pi.probs).reshape(n, n)
        r_sum = np.bincount(pairs, weights=dataset.r, minlength=n)
        cnt = np.bincount(pairs, minlength=n)
        reward = np.divide(r_sum, cnt, out=np.zeros(n), where=cnt > 0)
        pair, nxt = np.nonzero(trip)
        return cls(
            S, A, mdp.gamma, pi, init, d_data, next_op, reward,
            Transitions(pair, nxt, trip[pair, nxt]), mode="dataset", dataset=dataset,
        )

    def with_reward(self, reward) -> "Problem":
        reward = np.asarray(reward, float).reshape(-1)
        if reward.shape != (self.n_pairs,):
            raise InvalidArgumentError("reward must be a vector over pairs")
        return replace(self, reward=reward)

    def with_d_data(self, d_data) -> "Problem":
        if self.mode != "exact":
            raise InvalidArgumentError("d_data of a dataset problem is fixed by its samples")
        d_data = np.asarray(d_data, float).reshape(-1)
        P = self.next_op
        T = P.reshape(self.n_pairs, self.n_states, self.n_actions).sum(axis=2)
        pair, nxt = np.nonzero(T)
        w = d_data[pair] * T[pair, nxt]
        keep = w > 0
        return replace(self, d_data=d_data, transitions=Transitions(pair[keep], nxt[keep], w[keep]))

    # --- derived quantities of this problem's (possibly empirical) model ---

    def target_q(self) -> np.ndarray:
        return solve_q_matrix(self.next_op, self.reward, self.gamma)

    def target_visitation(self) -> np.ndarray:
        return solve_d_matrix(self.next_op, self.init, self.gamma)

    def target_value(self) -> float:
        return float(self.target_visitation() @ self.reward)

    def correction_ratio(self) -> np.ndarray:
        """zeta* = d^pi / d^D, zero off the support of d^D."""
        d_pi = self.target_visitation()
        off = (self.d_data <= 0) & (d_pi > SUPPORT_TOL)
        if np.any(off):
            raise AssumptionViolationError(
                f"bounded-ratio assumption violated: d^pi has mass on {int(off.sum())} pair(s) outside the support of d^D"
            )
        return np.divide(d_pi, self.d_data, out=np.zeros_like(d_pi), where=self.d_data > 0)

    def next_values(self, q: np.ndarray) -> np.ndarray:
        """V(s') = sum_a' pi(a'|s') Q(s', a') per state."""
        return (q.reshape(self.n_states, self.n_actions) * self.policy.probs).sum(axis=1)

    def pair_from_state(self, state_vec: np.ndarray) -> np.ndarray:
        """Spread a per-state weight over pairs via pi: w(s) pi(a|s)."""
        return (state_vec[:, None] * self.policy.probs).reshape(-1)
