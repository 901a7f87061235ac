"""Offline datasets collected from behavior policies, and their empirical d^D."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, ValidationError
from .mdp import Policy, TabularMdp, _as_rng, rollout

CSV_HEADER = ["s0", "s", "a", "r", "s_next"]


@dataclass(frozen=True)
class OfflineDataset:
    """Samples (s0, s, a, r, s') stored column-wise."""

    s0: np.ndarray
    s: np.ndarray
    a: np.ndarray
    r: np.ndarray
    s_next: np.ndarray
    n_states: int
    n_actions: int

    def __post_init__(self):
        cols = {}
        for name in ("s0", "s", "a", "s_next"):
            cols[name] = np.asarray(getattr(self, name), dtype=np.int64)
        cols["r"] = np.asarray(self.r, dtype=float)
        n = len(cols["s"])
        if any(len(c) != n for c in cols.values()):
            raise ValidationError("dataset columns have different lengths")
        for name in ("s0", "s", "s_next"):
            c = cols[name]
            if n and (c.min() < 0 or c.max() >= self.n_states):
                raise ValidationError(f"column {name}: state index out of range [0, {self.n_states})")
        if n and (cols["a"].min() < 0 or cols["a"].max() >= self.n_actions):
            raise ValidationError(f"column a: action index out of range [0, {self.n_actions})")
        for name, c in cols.items():
            c.setflags(write=False)
            object.__setattr__(self, name, c)

    def __len__(self):
        return len(self.s)

    @property
    def pairs(self) -> np.ndarray:
        return self.s * self.n_actions + self.a

    @property
    def counts_sa(self) -> np.ndarray:
        return np.bincount(self.pairs, minlength=self.n_states * self.n_actions).reshape(
            self.n_states, self.n_actions
        )

    def rows(self):
        return zip(self.s0.tolist(), self.s.tolist(), self.a.tolist(), self.r.tolist(), self.s_next.tolist())


def collect(mdp: TabularMdp, behavior: Policy, n_trajectories: int, horizon: int, rng_seed=0) -> OfflineDataset:
    """Every step of every behavior trajectory becomes one sample, paired with a fresh s0 ~ mu0."""
    if n_trajectories < 1 or horizon < 1:
        raise InvalidArgumentError("n_trajectories and horizon must be >= 1")
    rng = _as_rng(rng_seed)
    trajs = [rollout(mdp, behavior, horizon, rng) for _ in range(n_trajectories)]
    n = n_trajectories * horizon
    s0 = rng.choice(mdp.n_states, size=n, p=mdp.mu0)
    return OfflineDataset(
        s0=s0,
        s=np.concatenate([t.states for t in trajs]),
        a=np.concatenate([t.actions for t in trajs]),
        r=np.concatenate([t.rewards for t in trajs]),
        s_next=np.concatenate([t.next_states for t in trajs]),
        n_states=mdp.n_states,
        n_actions=mdp.n_actions,
    )


def empirical_dD(dataset: OfflineDataset) -> np.ndarray:
    if len(dataset) == 0:
        raise InvalidArgumentError("empty dataset has no empirical distribution")
    return dataset.counts_sa.reshape(-1) / len(dataset)


def population_dD(mdp: TabularMdp, behavior: Policy, horizon: int) -> np.ndarray:
    """Average over t < horizon of the behavior's state-action marginals; the limit of empirical_dD."""
    if horizon < 1:
        raise InvalidArgumentError("horizon must be >= 1")
    state = mdp.mu0.copy()
    total = np.zeros((mdp.n_states, mdp.n_actions))
    for _ in range(horizon):
        sa = state[:, None] * behavior.probs
        total += sa
        state = np.einsum("ij,ijk->k", sa, mdp.transition)
    return (total / horizon).reshape(-1)


def ratio_bound(d_data: np.ndarray, d_pi: np.ndarray, tol: float = 0.0) -> float:
    """max d_pi / d_data; ``math.inf`` when d_pi has mass where d_data has none."""
    d_data = np.asarray(d_data, float)
    d_pi = np.asarray(d_pi, float)
    if d_data.shape != d_pi.shape:
        raise InvalidArgumentError("distributions must have the same shape")
    support = d_data > 0
    if np.any(d_pi[~support] > tol):
        return math.inf
    if not support.any():
        return math.inf
    return float(np.max(d_pi[support] / d_data[support]))


def save_csv(dataset: OfflineDataset, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for s0, s, a, r, sn in dataset.rows():
            w.writerow([s0, s, a, repr(r), sn])


def load_csv(path, mdp: TabularMdp | None = None, n_states: int | None = None, n_actions: int | None = None) -> OfflineDataset:
    """Read a dataset CSV. With ``mdp``, rewards and transitions are checked against it."""
    if mdp is not None:
        n_states, n_actions = mdp.n_states, mdp.n_actions
    cols = {k: [] for k in CSV_HEADER}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CSV_HEADER:
            raise ValidationError(f"{path}: header must be {','.join(CSV_HEADER)}, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 5:
                raise ValidationError(f"{path} row {lineno}: expected 5 fields, got {len(row)}")
            try:
                s0, s, a, sn = int(row[0]), int(row[1]), int(row[2]), int(row[4])
                r = float(row[3])
            except ValueError as exc:
                raise ValidationError(f"{path} row {lineno}: {exc}") from exc
            if mdp is not None:
                if not (0 <= s < n_states and 0 <= a < n_actions and 0 <= sn < n_states and 0 <= s0 < n_states):
                    raise ValidationError(f"{path} row {lineno}: index out of range")
                if abs(r - mdp.reward[s, a]) > 1e-9:
                    raise ValidationError(f"{path} row {lineno}: r={r} but R({s},{a})={mdp.reward[s, a]}")
                if mdp.transition[s, a, sn] <= 0:
                    raise ValidationError(f"{path} row {lineno}: transition {s},{a} -> {sn} has probability 0")
                if mdp.mu0[s0] <= 0:
                    raise ValidationError(f"{path} row {lineno}: s0={s0} has zero initial probability")
            for k, v in zip(CSV_HEADER, (s0, s, a, r, sn)):
                cols[k].append(v)
    if n_states is None:
        n_states = 1 + max(max(cols["s0"], default=0), max(cols["s"], default=0), max(cols["s_next"], default=0))
    if n_actions is None:
        n_actions = 1 + max(cols["a"], default=0)
    return OfflineDataset(n_states=n_states, n_actions=n_actions, **cols)
