import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from unidice.errors import AssumptionViolationError, UnderdeterminedSystemError, UnsupportedError
from unidice.exact import (
    exact_solution,
    policy_value,
    policy_value_both,
    solve_d,
    solve_q,
    solve_undiscounted,
)
from unidice.mdp import (
    Policy,
    TabularMdp,
    chain_mdp,
    discounted_return,
    initial_pair_distribution,
    policy_operator,
    random_mdp,
    random_policy,
    rollout,
    single_state_mdp,
)


def value_iteration(mdp, pi, iters=1000):
    P = policy_operator(mdp, pi)
    q = np.zeros(mdp.n_pairs)
    for _ in range(iters):
        q = mdp.reward_vector() + mdp.gamma * P @ q
    return q


def test_single_state():
    mdp = single_state_mdp(reward=1.0, gamma=0.5)
    pi = Policy.uniform(1, 1)
    assert solve_q(mdp, pi).tolist() == pytest.approx([2.0])
    assert solve_d(mdp, pi).tolist() == pytest.approx([1.0])
    assert policy_value(mdp, pi) == pytest.approx(1.0)


def test_chain_matches_value_iteration():
    mdp, pi = chain_mdp(), Policy.uniform(2, 1)
    q = solve_q(mdp, pi)
    assert q.tolist() == pytest.approx([1.0, 2.0], abs=1e-12)
    np.testing.assert_allclose(q, value_iteration(mdp, pi), atol=1e-12)
    assert solve_d(mdp, pi).tolist() == pytest.approx([0.5, 0.5], abs=1e-12)
    assert policy_value_both(mdp, pi) == pytest.approx((0.5, 0.5), abs=1e-12)


def test_zero_reward_and_gamma_zero():
    mdp = random_mdp(4, 2, 0.0, 3)
    pi = random_policy(4, 2, 4)
    np.testing.assert_allclose(solve_d(mdp, pi), initial_pair_distribution(mdp, pi), atol=1e-15)
    zero = mdp.with_reward(np.zeros((4, 2))).with_gamma(0.9)
    assert np.all(solve_q(zero, pi) == 0.0)


@given(st.integers(0, 10_000), st.floats(-5, 5))
@settings(max_examples=25, deadline=None)
def test_value_shifts_with_reward(seed, c):
    mdp = random_mdp(3, 2, 0.9, seed)
    pi = random_policy(3, 2, seed + 1)
    shifted = mdp.with_reward(mdp.reward + c)
    assert policy_value(shifted, pi) == pytest.approx(policy_value(mdp, pi) + c, abs=1e-9)


@given(st.integers(0, 10_000))
@settings(max_examples=25, deadline=None)
def test_bellman_residuals_and_duality(seed):
    rng = np.random.default_rng(seed)
    mdp = random_mdp(int(rng.integers(1, 9)), int(rng.integers(1, 4)), 0.9, rng)
    pi = random_policy(mdp.n_states, mdp.n_actions, rng)
    P = policy_operator(mdp, pi)
    q, d = solve_q(mdp, pi), solve_d(mdp, pi)
    assert np.max(np.abs(q - mdp.reward_vector() - 0.9 * P @ q)) < 1e-9
    assert d.sum() == pytest.approx(1.0, abs=1e-9) and d.min() >= 0
    primal, dual = policy_value_both(mdp, pi)
    assert abs(primal - dual) < 1e-8


def test_monte_carlo_discounted_value():
    mdp = random_mdp(3, 2, 0.8, 7)
    pi = random_policy(3, 2, 8)
    rng = np.random.default_rng(0)
    returns = np.array([discounted_return(rollout(mdp, pi, 80, rng), mdp.gamma) for _ in range(4000)])
    se = returns.std(ddof=1) / np.sqrt(len(returns))
    assert abs(returns.mean() - policy_value(mdp, pi)) < 3 * se + 1e-6  # 0.8**80 tail is ~1e-8


def test_gamma_one_is_rejected_by_discounted_solvers():
    mdp = single_state_mdp(gamma=1.0)
    with pytest.raises(UnsupportedError):
        solve_q(mdp, Policy.uniform(1, 1))


def test_undiscounted_examples():
    sol = solve_undiscounted(single_state_mdp(reward=0.3, gamma=1.0), Policy.uniform(1, 1))
    assert sol.visitation.tolist() == pytest.approx([1.0]) and sol.rho == pytest.approx(0.3)
    walk = TabularMdp([[[0.5, 0.5]], [[0.5, 0.5]]], [[0.0], [1.0]], [1.0, 0.0], 1.0)
    sol = solve_undiscounted(walk, Policy.uniform(2, 1))
    assert sol.visitation.tolist() == pytest.approx([0.5, 0.5], abs=1e-12)
    assert sol.rho == pytest.approx(0.5, abs=1e-12) and sol.lambda_star == sol.rho


def test_undiscounted_periodic_chain_is_fine():
    flip = TabularMdp([[[0.0, 1.0]], [[1.0, 0.0]]], [[0.0], [1.0]], [1.0, 0.0], 1.0)
    assert solve_undiscounted(flip, Policy.uniform(2, 1)).rho == pytest.approx(0.5)


def test_undiscounted_errors():
    stuck = TabularMdp([[[1.0, 0.0]], [[0.0, 1.0]]], [[0.0], [1.0]], [0.5, 0.5], 1.0)
    with pytest.raises(AssumptionViolationError, match="ergodicity"):
        solve_undiscounted(stuck, Policy.uniform(2, 1))
    with pytest.raises(UnderdeterminedSystemError):
        solve_undiscounted(random_mdp(3, 2, 1.0, 0), random_policy(3, 2, 1), normalization=False)


def test_undiscounted_is_the_discounted_limit():
    mdp = random_mdp(4, 2, 1.0, 12)
    pi = random_policy(4, 2, 13)
    stationary = solve_undiscounted(mdp, pi).visitation
    near = solve_d(mdp.with_gamma(0.9999), pi)
    assert np.max(np.abs(stationary - near)) < 1e-4


def test_exact_solution_dispatch_and_json():
    sol = exact_solution(chain_mdp(), Policy.uniform(2, 1))
    assert sol.to_dict()["rho"] == pytest.approx(0.5)
    assert exact_solution(chain_mdp(gamma=1.0), Policy.uniform(2, 1)).q_values is None
