"""Stochastic gradient descent-ascent on the regularized Lagrangian, and the unconstrained primal and dual forms."""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from .dice import DiceConfig, Solution, estimates, lagrangian_gradients, lagrangian_value
from .errors import DivergedError, InvalidArgumentError, UnsupportedConfigError
from .problem import Problem

DIVERGENCE_LIMIT = 1e8
TRACE_HEADER = ["step", "rho_q", "rho_zeta", "rho_lagrangian", "objective", "true_rho"]


@dataclass(frozen=True)
class Parametrization:
    """Tabular tables, or Q = phi w and zeta = phi v (zeta = (phi u)^2 under positivity)."""

    kind: str = "tabular"
    features: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("tabular", "linear"):
            raise InvalidArgumentError(f"unknown parametrization {self.kind!r}")
        if self.kind == "linear":
            if self.features is None:
                raise InvalidArgumentError("linear parametrization needs a feature matrix")
            phi = np.asarray(self.features, float)
            if phi.ndim != 2 or phi.shape[1] < 1 or not np.all(np.isfinite(phi)):
                raise InvalidArgumentError("features must be a finite 2-D array with at least one column")
            object.__setattr__(self, "features", phi)

    @classmethod
    def linear(cls, features) -> "Parametrization":
        return cls("linear", features)

    def check(self, problem: Problem):
        if self.kind == "tabular":
            return
        phi = self.features
        if phi.shape[0] != problem.n_pairs:
            raise InvalidArgumentError(f"features have {phi.shape[0]} rows, problem has {problem.n_pairs} pairs")
        support = phi[problem.d_data > 0]
        rank = np.linalg.matrix_rank(support) if support.size else 0
        if rank < phi.shape[1]:
            warnings.warn(f"features have rank {rank} < {phi.shape[1]} on the data support", RuntimeWarning, stacklevel=3)

    def size(self, problem: Problem) -> int:
        return problem.n_pairs if self.kind == "tabular" else self.features.shape[1]

    def table(self, w):
        return w if self.kind == "tabular" else self.features @ w

    def pull(self, g):
        """Chain rule from a table gradient to a weight gradient."""
        return g if self.kind == "tabular" else self.features.T @ g

    def ones(self, problem: Problem):
        """Weights whose table is (as close as possible to) all ones."""
        if self.kind == "tabular":
            return np.ones(problem.n_pairs)
        return np.linalg.lstsq(self.features, np.ones(problem.n_pairs), rcond=None)[0]


@dataclass(frozen=True)
class SgdaSettings:
    lr_primal: float = 1e-3
    lr_dual: float = 1e-3
    lr_lambda: float = 1e-3
    steps: int = 10_000
    batch_size: int = 2048
    averaging: bool = True
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("lr_primal", "lr_dual", "lr_lambda"):
            if not getattr(self, name) > 0:
                raise InvalidArgumentError(f"{name} must be > 0")
        if self.steps < 1 or self.batch_size < 1:
            raise InvalidArgumentError("steps and batch_size must be >= 1")

    def describe(self) -> str:
        return f"lr_primal={self.lr_primal:g}, lr_dual={self.lr_dual:g}, lr_lambda={self.lr_lambda:g}"


@dataclass
class TrainingTrace:
    mode: str = "exact"
    records: list = field(default_factory=list)

    def add(self, step, triple, objective):
        if self.records and step <= self.records[-1][0]:
            raise InvalidArgumentError("trace steps must be strictly increasing")
        self.records.append((int(step), *map(float, triple), float(objective)))

    @property
    def steps(self) -> np.ndarray:
        return np.array([r[0] for r in self.records], dtype=int)

    def column(self, name: str) -> np.ndarray:
        return np.array([r[TRACE_HEADER.index(name)] for r in self.records])

    def to_csv(self, path, true_rho: float | None = None):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(TRACE_HEADER)
            for rec in self.records:
                w.writerow([*rec, "" if true_rho is None else true_rho])


def _checkpoints(steps: int) -> set:
    every = max(steps // 200, 1)
    return set(range(every, steps + 1, every)) | {steps}


class _TailAverage:
    """Uniform average of the iterates from step ``start`` on."""

    def __init__(self, start: int):
        self.start = start
        self.n = 0
        self.total = None

    def update(self, step, *arrays):
        if step < self.start:
            return
        self.n += 1
        if self.total is None:
            self.total = [np.array(a, float) for a in arrays]
        else:
            for t, a in zip(self.total, arrays):
                t += a

    def value(self, *fallback):
        if self.n == 0:
            return fallback
        return tuple(t / self.n for t in self.total)


def _guard(objective, step, settings):
    if not np.isfinite(objective) or abs(objective) > DIVERGENCE_LIMIT:
        raise DivergedError(f"objective {objective:.3g} at step {step} exceeds {DIVERGENCE_LIMIT:g}; step sizes {settings.describe()}")


class _BatchGradients:
    """Minibatch estimates of the Lagrangian gradients from raw dataset rows."""

    def __init__(self, config: DiceConfig, problem: Problem, idx):
        ds = problem.dataset
        self.cfg, self.p = config, problem
        self.x = ds.pairs[idx]
        self.sn = ds.s_next[idx]
        self.r = ds.r[idx]
        self.s0 = ds.s0[idx]
        self.b = len(idx)

    def q_lam(self, q, zeta, lam):
        p, cfg, n, b = self.p, self.cfg, self.p.n_pairs, self.b
        g = p.gamma
        zx = zeta[self.x]
        gq = (1.0 - g) * p.pair_from_state(np.bincount(self.s0, minlength=p.n_states) / b)
        gq += g * p.pair_from_state(np.bincount(self.sn, weights=zx, minlength=p.n_states) / b)
        gq -= np.bincount(self.x, weights=zx, minlength=n) / b
        if cfg.alpha_q:
            gq += cfg.alpha_q * np.bincount(self.x, weights=cfg.f1.f_prime(q[self.x]), minlength=n) / b
        gl = 1.0 - zx.mean() if cfg.normalization else 0.0
        return gq, gl

    def zeta(self, q, zeta, lam):
        p, cfg = self.p, self.cfg
        lam = lam if cfg.normalization else 0.0
        v = p.next_values(q)
        inner = cfg.alpha_r * self.r + p.gamma * v[self.sn] - q[self.x] - lam
        if cfg.alpha_zeta:
            inner = inner - cfg.alpha_zeta * cfg.f2.f_prime(zeta[self.x])
        return np.bincount(self.x, weights=inner, minlength=p.n_pairs) / self.b


class _FullGradients:
    def __init__(self, config, problem):
        self.cfg, self.p = config, problem

    def q_lam(self, q, zeta, lam):
        gq, _, gl = lagrangian_gradients(self.cfg, self.p, Solution(q, zeta, lam))
        return gq, gl

    def zeta(self, q, zeta, lam):
        return lagrangian_gradients(self.cfg, self.p, Solution(q, zeta, lam))[1]


def sgda(config: DiceConfig, problem: Problem, param: Parametrization | None = None, settings: SgdaSettings | None = None):
    """Alternating descent on (Q, lambda) and ascent on zeta; returns (Solution, TrainingTrace).

    Exact problems use full population gradients. Dataset problems draw
    minibatches of raw rows (the full dataset when batch_size >= N).
    """
    param = param or Parametrization()
    settings = settings or SgdaSettings()
    param.check(problem)
    rng = np.random.default_rng(settings.rng_seed)
    k = param.size(problem)
    w = np.zeros(k)
    v = param.ones(problem) if config.positivity else np.zeros(k)
    lam = 0.0

    def tables(w, v):
        q = param.table(w)
        z = param.table(v)
        return q, (z * z if config.positivity else z), z

    full = _FullGradients(config, problem)
    n_rows = len(problem.dataset) if problem.mode == "dataset" else 0
    use_batches = problem.mode == "dataset" and settings.batch_size < n_rows
    if problem.mode == "dataset" and not use_batches:
        full = _BatchGradients(config, problem, np.arange(n_rows))

    avg = _TailAverage(settings.steps // 2 + 1 if settings.averaging else settings.steps + 1)
    checkpoints = _checkpoints(settings.steps)
    trace = TrainingTrace(mode=problem.mode)
    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(1, settings.steps + 1):
            grads = _BatchGradients(config, problem, rng.integers(n_rows, size=settings.batch_size)) if use_batches else full
            q, zeta, _ = tables(w, v)
            gq, gl = grads.q_lam(q, zeta, lam)
            w = w - settings.lr_primal * param.pull(gq)
            if config.normalization:
                lam -= settings.lr_lambda * gl
            q, zeta, z = tables(w, v)
            gz = grads.zeta(q, zeta, lam)
            if config.positivity:
                gz = 2.0 * z * gz
            v = v + settings.lr_dual * param.pull(gz)
            q, zeta, _ = tables(w, v)
            avg.update(step, w, v, q, zeta, np.array([lam]))
            if step in checkpoints:
                sol = _current(avg, w, v, q, zeta, lam)
                obj = lagrangian_value(config, problem, sol)
                _guard(obj, step, settings)
                trace.add(step, estimates(sol, problem), obj)
    return _current(avg, w, v, q, zeta, lam), trace


def _current(avg, w, v, q, zeta, lam):
    w_, v_, q_, z_, lam_ = avg.value(w, v, q, zeta, np.array([lam]))
    return Solution(q_, z_, float(np.ravel(lam_)[0]), q_weights=w_, zeta_weights=v_)


# --- unconstrained forms ------------------------------------------------------


def _triples(problem: Problem):
    t = problem.transitions
    return t.pair, t.next_state, t.weight


def _primal_objective_and_grad(config: DiceConfig, problem: Problem, q, lam):
    g, az = problem.gamma, config.alpha_zeta
    dD = problem.d_data
    lam = lam if config.normalization else 0.0
    obj = (1.0 - g) * problem.init @ q + lam
    grad = (1.0 - g) * problem.init
    if config.alpha_q:
        obj += config.alpha_q * dD @ config.f1.f(q)
        grad = grad + config.alpha_q * dD * config.f1.f_prime(q)
    if problem.mode == "exact":
        delta = config.alpha_r * problem.reward + g * problem.next_op @ q - q - lam
        obj += az * dD @ config.f2.f_conj(delta / az)
        s = dD * config.f2.f_conj_prime(delta / az)
        grad = grad + g * problem.next_op.T @ s - s
        g_lam = 1.0 - s.sum()
    else:
        # the conjugate sees each sampled s' separately; biased under stochastic transitions
        x, sn, wt = _triples(problem)
        v = problem.next_values(q)
        delta = config.alpha_r * problem.reward[x] + g * v[sn] - q[x] - lam
        obj += az * wt @ config.f2.f_conj(delta / az)
        s = wt * config.f2.f_conj_prime(delta / az)
        grad = grad - np.bincount(x, weights=s, minlength=problem.n_pairs)
        grad = grad + g * problem.pair_from_state(np.bincount(sn, weights=s, minlength=problem.n_states))
        g_lam = 1.0 - s.sum()
    return float(obj), grad, (g_lam if config.normalization else 0.0)


def recover_zeta(q, config: DiceConfig, problem: Problem, lam: float = 0.0) -> np.ndarray:
    """zeta = f2*'((alpha_R R + gamma P Q - Q - lambda) / alpha_zeta) with the problem's next-pair operator."""
    if config.alpha_zeta <= 0:
        raise UnsupportedConfigError("recovering zeta from Q needs alpha_zeta > 0")
    q = np.asarray(q, float)
    lam = lam if config.normalization else 0.0
    delta = config.alpha_r * problem.reward + problem.gamma * problem.next_op @ q - q - lam
    return config.f2.f_conj_prime(delta / config.alpha_zeta)


def unconstrained_primal(config: DiceConfig, problem: Problem, param: Parametrization | None = None, settings: SgdaSettings | None = None):
    """Gradient descent on the Q-only objective left after maximizing out zeta.

    Returns (Solution, TrainingTrace); the solution's zeta is recovered from Q
    and the trace's ``mode`` records whether the conjugate was marginalized
    (exact) or applied per sample (dataset).
    """
    if config.alpha_zeta <= 0:
        raise UnsupportedConfigError("the unconstrained primal form needs alpha_zeta > 0")
    if config.positivity:
        raise UnsupportedConfigError("the unconstrained primal form has no zeta to constrain; drop positivity")
    param = param or Parametrization()
    settings = settings or SgdaSettings()
    param.check(problem)
    w = np.zeros(param.size(problem))
    lam = 0.0
    avg = _TailAverage(settings.steps // 2 + 1 if settings.averaging else settings.steps + 1)
    checkpoints = _checkpoints(settings.steps)
    trace = TrainingTrace(mode=problem.mode)
    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(1, settings.steps + 1):
            obj, gq, gl = _primal_objective_and_grad(config, problem, param.table(w), lam)
            w = w - settings.lr_primal * param.pull(gq)
            lam -= settings.lr_lambda * gl
            avg.update(step, w, np.array([lam]))
            if step in checkpoints:
                _guard(obj, step, settings)
                w_avg, lam_avg = avg.value(w, np.array([lam]))
                q = param.table(w_avg)
                sol = Solution(q, recover_zeta(q, config, problem, lam_avg[0]), lam_avg[0])
                trace.add(step, estimates(sol, problem), _primal_objective_and_grad(config, problem, q, lam_avg[0])[0])
    w_avg, lam_avg = avg.value(w, np.array([lam]))
    q = param.table(w_avg)
    return Solution(q, recover_zeta(q, config, problem, lam_avg[0]), lam_avg[0], q_weights=w_avg), trace


def _dual_terms(problem: Problem):
    """Per-sample terms (x, y, c, m) for the dataset form of the f1* penalty.

    For a next pair y with empirical next-pair mass m(y), a sampled predecessor
    x gets weight c = w pi(a'|s') d^D(y) / m(y), so the weights on y sum to
    d^D(y) and averaging m(y) zeta(x) over them gives (P_* d^D zeta)(y).
    """
    x, sn, wt = _triples(problem)
    A = problem.n_actions
    probs = problem.policy.probs[sn]  # (n_triples, A)
    xs = np.repeat(x, A)
    ys = (sn[:, None] * A + np.arange(A)[None, :]).reshape(-1)
    mass = (wt[:, None] * probs).reshape(-1)
    keep = mass > 0
    xs, ys, mass = xs[keep], ys[keep], mass[keep]
    m = np.bincount(ys, weights=mass, minlength=problem.n_pairs)
    c = mass * problem.d_data[ys] / m[ys]
    return xs, ys, c, m


def _dual_objective_and_grad(config: DiceConfig, problem: Problem, zeta, terms):
    g, aq = problem.gamma, config.alpha_q
    dD, c0 = problem.d_data, (1.0 - problem.gamma) * problem.init
    f1 = config.f1
    obj = config.alpha_r * dD @ (zeta * problem.reward)
    grad = config.alpha_r * dD * problem.reward
    if config.alpha_zeta:
        obj -= config.alpha_zeta * dD @ config.f2.f(zeta)
        grad = grad - config.alpha_zeta * dD * config.f2.f_prime(zeta)
    if problem.mode == "exact":
        arg = (dD * zeta - g * problem.next_op.T @ (dD * zeta) - c0) / (aq * dD)
        obj -= aq * dD @ f1.f_conj(arg)
        grad = grad - dD * (f1.f_conj_prime(arg) - g * problem.next_op @ f1.f_conj_prime(arg))
    else:
        xs, ys, c, m = terms
        n = problem.n_pairs
        arg = (dD[ys] * zeta[ys] - c0[ys] - g * m[ys] * zeta[xs]) / (aq * dD[ys])
        obj -= aq * c @ f1.f_conj(arg)
        s = c * f1.f_conj_prime(arg) / dD[ys]
        grad = grad - np.bincount(ys, weights=s * dD[ys], minlength=n) + g * np.bincount(xs, weights=s * m[ys], minlength=n)
        lone = m <= 0  # pairs nobody transitions into
        if lone.any():
            arg0 = (dD[lone] * zeta[lone] - c0[lone]) / (aq * dD[lone])
            obj -= aq * dD[lone] @ f1.f_conj(arg0)
            grad[lone] -= dD[lone] * f1.f_conj_prime(arg0)
    return float(obj), grad


def q_from_zeta(zeta, config: DiceConfig, problem: Problem) -> np.ndarray:
    """Q = f1*'(((I - gamma P_*)(d^D zeta) - (1 - gamma) mu0 pi) / (alpha_Q d^D))."""
    dD = problem.d_data
    arg = (dD * zeta - problem.gamma * problem.next_op.T @ (dD * zeta) - (1.0 - problem.gamma) * problem.init) / (config.alpha_q * dD)
    return config.f1.f_conj_prime(arg)


def unconstrained_dual(config: DiceConfig, problem: Problem, param: Parametrization | None = None, settings: SgdaSettings | None = None):
    """Gradient ascent on the zeta-only objective left after minimizing out Q.

    Needs d^D > 0 on every pair. Returns (Solution, TrainingTrace) with Q
    recovered from zeta.
    """
    if config.alpha_q <= 0:
        raise UnsupportedConfigError("the unconstrained dual form needs alpha_q > 0")
    if config.normalization:
        raise UnsupportedConfigError("the unconstrained dual form is stated without the normalization multiplier")
    if np.any(problem.d_data <= 0):
        raise InvalidArgumentError("the unconstrained dual form divides by d^D; every pair needs data")
    param = param or Parametrization()
    settings = settings or SgdaSettings()
    param.check(problem)
    terms = _dual_terms(problem) if problem.mode == "dataset" else None
    v = param.ones(problem) if config.positivity else np.zeros(param.size(problem))
    avg = _TailAverage(settings.steps // 2 + 1 if settings.averaging else settings.steps + 1)
    checkpoints = _checkpoints(settings.steps)
    trace = TrainingTrace(mode=problem.mode)

    def zeta_of(v):
        z = param.table(v)
        return (z * z if config.positivity else z), z

    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(1, settings.steps + 1):
            zeta, z = zeta_of(v)
            obj, gz = _dual_objective_and_grad(config, problem, zeta, terms)
            if config.positivity:
                gz = 2.0 * z * gz
            v = v + settings.lr_dual * param.pull(gz)
            avg.update(step, v, zeta_of(v)[0])
            if step in checkpoints:
                _guard(obj, step, settings)
                _, zeta_avg = avg.value(v, zeta_of(v)[0])
                sol = Solution(q_from_zeta(zeta_avg, config, problem), zeta_avg)
                trace.add(step, estimates(sol, problem), _dual_objective_and_grad(config, problem, zeta_avg, terms)[0])
    v_avg, zeta_avg = avg.value(v, zeta_of(v)[0])
    return Solution(q_from_zeta(zeta_avg, config, problem), zeta_avg, zeta_weights=v_avg), trace
