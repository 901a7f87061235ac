import numpy as np
import pytest

from conftest import cycle_mdp, random_problem
from unidice.data import OfflineDataset, collect, empirical_dD
from unidice.dice import DiceConfig, Solution, closed_form_solution, estimates, named_config, table_configs
from unidice.errors import DivergedError, InvalidArgumentError, UnsupportedConfigError
from unidice.mdp import Policy, TabularMdp, random_mdp, random_policy, single_state_mdp
from unidice.optim import (
    TRACE_HEADER,
    Parametrization,
    SgdaSettings,
    recover_zeta,
    sgda,
    unconstrained_dual,
    unconstrained_primal,
)
from unidice.problem import Problem

FAST = SgdaSettings(0.5, 0.5, 0.5, 20_000)


def dist(a: Solution, b: Solution):
    return max(np.abs(a.q - b.q).max(), np.abs(a.zeta - b.zeta).max(), abs(a.lam - b.lam))


def exact_frequency_dataset(mdp, counts):
    """Single-action dataset whose empirical transition frequencies equal T exactly."""
    s, sn = [], []
    for state, c in enumerate(counts):
        for nxt, p in enumerate(mdp.transition[state, 0]):
            k = round(c * p)
            s += [state] * k
            sn += [nxt] * k
    s, sn = np.array(s), np.array(sn)
    return OfflineDataset(np.zeros_like(s), s, np.zeros_like(s), mdp.reward[s, 0], sn, mdp.n_states, 1)


def test_settings_validation():
    with pytest.raises(InvalidArgumentError):
        SgdaSettings(lr_primal=0)
    with pytest.raises(InvalidArgumentError):
        SgdaSettings(steps=0)
    with pytest.raises(InvalidArgumentError):
        Parametrization("linear")


def test_single_state_bestdice():
    p = Problem.exact(single_state_mdp(reward=0.8), Policy.uniform(1, 1), [1.0])
    c = DiceConfig(0, 1, 1, True, True)
    sol, _ = sgda(c, p, settings=SgdaSettings(0.3, 0.3, 0.3, 5000))
    assert sol.zeta[0] == pytest.approx(1.0, abs=1e-3)
    assert estimates(sol, p).rho_zeta == pytest.approx(0.8, abs=1e-3)


@pytest.mark.parametrize("config", [named_config("BestDICE"), *table_configs()[2:]], ids=lambda c: c.label())
def test_chain_converges_to_oracle(chain_problem, config):
    sol, _ = sgda(config, chain_problem, settings=FAST)
    oracle, _ = closed_form_solution(config, chain_problem)
    if config.alpha_q == 0:
        sol, oracle = sol.canonical(0.5), oracle.canonical(0.5)
    assert dist(sol, oracle) < 1e-2


def test_normalization_holds_at_the_saddle(chain_problem):
    sol, _ = sgda(named_config("GradientDICE"), chain_problem, settings=FAST)
    assert chain_problem.d_data @ sol.zeta == pytest.approx(1.0, abs=1e-3)


def test_positivity_keeps_zeta_nonnegative():
    p = random_problem(3)
    sol, _ = sgda(DiceConfig(1, 0, 1, True), p, settings=SgdaSettings(0.2, 0.2, 0.2, 3000))
    assert sol.zeta.min() >= 0


def test_one_hot_linear_equals_tabular():
    p = random_problem(4)
    st = SgdaSettings(0.3, 0.3, 0.3, 2000, rng_seed=7)
    c = named_config("BestDICE")
    tab, _ = sgda(c, p, settings=st)
    lin, _ = sgda(c, p, Parametrization.linear(np.eye(6)), st)
    assert dist(tab, lin) < 1e-6


def test_seed_determinism_in_dataset_mode():
    mdp, pi = random_mdp(3, 2, 0.9, 0), random_policy(3, 2, 1)
    ds = collect(mdp, random_policy(3, 2, 2), 20, 50, rng_seed=0)
    p = Problem.from_dataset(mdp, pi, ds)
    st = SgdaSettings(0.1, 0.1, 0.1, 500, batch_size=64, rng_seed=3)
    _, a = sgda(named_config("DualDICE"), p, settings=st)
    _, b = sgda(named_config("DualDICE"), p, settings=st)
    assert a.records == b.records
    _, c = sgda(named_config("DualDICE"), p, settings=SgdaSettings(0.1, 0.1, 0.1, 500, batch_size=64, rng_seed=4))
    assert a.records != c.records


def test_full_batch_dataset_run_reaches_plug_in_oracle():
    mdp, pi = random_mdp(3, 2, 0.8, 5), random_policy(3, 2, 6)
    ds = collect(mdp, random_policy(3, 2, 7), 40, 50, rng_seed=1)
    p = Problem.from_dataset(mdp, pi, ds)
    c = named_config("DualDICE")
    sol, _ = sgda(c, p, settings=SgdaSettings(0.5, 0.5, 0.5, 20_000, batch_size=len(ds)))
    oracle, _ = closed_form_solution(c, p)
    assert dist(sol, oracle) < 1e-2


def test_minibatch_gradients_are_unbiased():
    from unidice.optim import _BatchGradients

    mdp, pi = random_mdp(3, 2, 0.8, 8), random_policy(3, 2, 9)
    ds = collect(mdp, random_policy(3, 2, 10), 10, 30, rng_seed=2)
    p = Problem.from_dataset(mdp, pi, ds)
    c = DiceConfig(0.5, 0.0, 1, False, True)
    rng = np.random.default_rng(0)
    q, z, lam = rng.normal(size=6), rng.normal(size=6), 0.3
    full = _BatchGradients(c, p, np.arange(len(ds)))
    gq, gl = full.q_lam(q, z, lam)
    parts = [_BatchGradients(c, p, idx) for idx in np.array_split(np.arange(len(ds)), 5)]
    np.testing.assert_allclose(sum(b.q_lam(q, z, lam)[0] * b.b for b in parts) / len(ds), gq, atol=1e-12)
    np.testing.assert_allclose(sum(b.zeta(q, z, lam) * b.b for b in parts) / len(ds), full.zeta(q, z, lam), atol=1e-12)


def test_trace_shape_and_csv(tmp_path, chain_problem):
    _, trace = sgda(named_config("DualDICE"), chain_problem, settings=SgdaSettings(0.1, 0.1, 0.1, 1000))
    steps = trace.steps
    assert steps[-1] == 1000 and np.all(np.diff(steps) > 0) and len(steps) == 200
    trace.to_csv(tmp_path / "t.csv", true_rho=0.5)
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == ",".join(TRACE_HEADER) and lines[-1].endswith(",0.5")


def test_divergence_names_step_sizes(chain_problem):
    with pytest.raises(DivergedError, match="lr_primal=1000"):
        sgda(named_config("DualDICE"), chain_problem, settings=SgdaSettings(1000, 1000, 1, 400))


# --- unconstrained forms ------------------------------------------------------


def test_recover_zeta_examples(chain_problem):
    c = DiceConfig(0, 1, 1)
    sol, _ = closed_form_solution(c, chain_problem)
    np.testing.assert_allclose(recover_zeta(sol.q, c, chain_problem), chain_problem.correction_ratio(), atol=1e-8)
    assert np.all(recover_zeta(np.zeros(2), DiceConfig(0, 1, 0), chain_problem) == 0)
    np.testing.assert_allclose(recover_zeta(np.zeros(2), DiceConfig(0, 2, 1), chain_problem), chain_problem.reward / 2)
    with pytest.raises(UnsupportedConfigError):
        recover_zeta(np.zeros(2), DiceConfig(1, 0, 1), chain_problem)


@pytest.mark.parametrize("config", [DiceConfig(0, 1, 1), DiceConfig(0, 1, 0), DiceConfig(0, 0.5, 1, normalization=True)])
def test_unconstrained_primal_exact_mode(config):
    p = random_problem(11).with_d_data(np.full(6, 1 / 6))
    sol, trace = unconstrained_primal(config, p, settings=SgdaSettings(1.0, 1.0, 0.5, 20_000))
    oracle, _ = closed_form_solution(config, p)
    assert trace.mode == "exact"
    assert np.abs(sol.canonical(p.gamma).q - oracle.canonical(p.gamma).q).max() < 1e-3
    np.testing.assert_allclose(sol.zeta, p.correction_ratio(), atol=1e-3)


def test_unconstrained_primal_deterministic_transitions():
    mdp = cycle_mdp()
    ds = exact_frequency_dataset(mdp, [2, 3, 5])
    pd = Problem.from_dataset(mdp, Policy.uniform(3, 1), ds)
    pe = Problem.exact(mdp, Policy.uniform(3, 1), empirical_dD(ds))
    c = DiceConfig(0, 1, 1)
    sol, trace = unconstrained_primal(c, pd, settings=FAST)
    assert trace.mode == "dataset"
    assert np.abs(sol.q - closed_form_solution(c, pe)[0].q).max() < 1e-3


def test_unconstrained_primal_stochastic_bias():
    mdp = TabularMdp([[[0.5, 0.5]], [[0.5, 0.5]]], [[0.0], [1.0]], [1.0, 0.0], 0.9)
    ds = exact_frequency_dataset(mdp, [2, 2])
    pi = Policy.uniform(2, 1)
    pd, pe = Problem.from_dataset(mdp, pi, ds), Problem.exact(mdp, pi, empirical_dD(ds))
    np.testing.assert_allclose(pd.next_op, pe.next_op)
    c = DiceConfig(0, 1, 1)
    oracle = closed_form_solution(c, pe)[0].q
    biased, _ = unconstrained_primal(c, pd, settings=FAST)
    exact, _ = unconstrained_primal(c, pe, settings=FAST)
    assert np.abs(biased.q - oracle).max() > 1e-3
    assert np.abs(exact.q - oracle).max() < 1e-3


def test_unconstrained_primal_rejects_alpha_zeta_zero(chain_problem):
    with pytest.raises(UnsupportedConfigError):
        unconstrained_primal(DiceConfig(1, 0, 1), chain_problem)


@pytest.mark.parametrize(
    "config,lr",
    [(DiceConfig(1, 0, 1), 0.5), (DiceConfig(1, 0, 0), 0.5), (DiceConfig(1, 0, 0, True), 0.1), (DiceConfig(1, 0, 1, True), 0.01)],
    ids=lambda x: x.label() if isinstance(x, DiceConfig) else str(x),
)
def test_unconstrained_dual_exact_mode(config, lr):
    p = Problem.exact(cycle_mdp(), Policy.uniform(3, 1), [0.2, 0.3, 0.5])
    sol, _ = unconstrained_dual(config, p, settings=SgdaSettings(lr, lr, lr, 100_000 if lr < 0.1 else 20_000))
    oracle, _ = closed_form_solution(config, p)
    assert np.abs(sol.zeta - oracle.zeta).max() < 1e-3
    assert np.abs(sol.q - oracle.q).max() < 1e-3


def test_unconstrained_dual_alpha_r_zero_recovers_visitation():
    p = random_problem(12).with_d_data(np.full(6, 1 / 6))
    sol, _ = unconstrained_dual(DiceConfig(1, 0, 0), p, settings=FAST)
    np.testing.assert_allclose(p.d_data * sol.zeta, p.target_visitation(), atol=1e-3)


def test_unconstrained_dual_single_state():
    p = Problem.exact(single_state_mdp(reward=0.0), Policy.uniform(1, 1), [1.0])
    sol, _ = unconstrained_dual(DiceConfig(2, 0, 0), p, settings=SgdaSettings(0.5, 0.5, 0.5, 2000))
    assert sol.zeta[0] == pytest.approx(1.0, abs=1e-6)


def test_unconstrained_dual_dataset_matches_exact_with_unique_predecessors():
    mdp = cycle_mdp()
    ds = exact_frequency_dataset(mdp, [2, 3, 5])
    pi = Policy.uniform(3, 1)
    pd, pe = Problem.from_dataset(mdp, pi, ds), Problem.exact(mdp, pi, empirical_dD(ds))
    c = DiceConfig(1, 0, 1)
    a, ta = unconstrained_dual(c, pd, settings=FAST)
    b, tb = unconstrained_dual(c, pe, settings=FAST)
    assert (ta.mode, tb.mode) == ("dataset", "exact")
    assert np.abs(a.zeta - b.zeta).max() < 1e-3


def test_unconstrained_dual_dataset_bias_with_shared_successors():
    mdp = TabularMdp([[[0.5, 0.5]], [[0.5, 0.5]]], [[0.0], [1.0]], [1.0, 0.0], 0.9)
    ds = exact_frequency_dataset(mdp, [2, 6])
    pi = Policy.uniform(2, 1)
    pd, pe = Problem.from_dataset(mdp, pi, ds), Problem.exact(mdp, pi, empirical_dD(ds))
    c = DiceConfig(1, 0, 1)
    a, _ = unconstrained_dual(c, pd, settings=FAST)
    b, _ = unconstrained_dual(c, pe, settings=FAST)
    assert np.abs(a.zeta - b.zeta).max() > 1e-3


def test_unconstrained_dual_guards(chain_problem):
    with pytest.raises(UnsupportedConfigError):
        unconstrained_dual(DiceConfig(0, 1, 1), chain_problem)
    with pytest.raises(InvalidArgumentError):
        unconstrained_dual(DiceConfig(1, 0, 1), chain_problem.with_d_data([0.0, 1.0]))
