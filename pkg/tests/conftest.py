import sys

import numpy as np
import pytest

from unidice.experiments import exact_problem, load_fixture
from unidice.mdp import Policy, TabularMdp, chain_mdp, random_mdp, random_policy
from unidice.problem import Problem

CHAIN_DD = [0.3, 0.7]


def random_problem(seed, n_states=3, n_actions=2, gamma=0.9, reward_low=-1.0, reward_high=1.0):
    rng = np.random.default_rng(seed)
    mdp = random_mdp(n_states, n_actions, gamma, rng, reward_low=reward_low, reward_high=reward_high)
    pi = random_policy(n_states, n_actions, rng)
    d_data = rng.dirichlet(np.ones(n_states * n_actions))
    return Problem.exact(mdp, pi, d_data)


def cycle_mdp(rewards=(1.0, -0.5, 0.3), gamma=0.8):
    """Single action, deterministic 0 -> 1 -> 2 -> 0."""
    n = len(rewards)
    T = np.zeros((n, 1, n))
    for s in range(n):
        T[s, 0, (s + 1) % n] = 1.0
    mu0 = np.zeros(n)
    mu0[0] = 1.0
    return TabularMdp(T, [[r] for r in rewards], mu0, gamma)


@pytest.fixture
def chain_problem():
    return Problem.exact(chain_mdp(), Policy.uniform(2, 1), CHAIN_DD)


@pytest.fixture(scope="session")
def designed():
    return load_fixture("designed")


@pytest.fixture
def designed_problem(designed):
    return exact_problem(*designed)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.RESULTS, key=lambda l: int(l.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
