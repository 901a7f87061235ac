"""Convex regularizers paired with their Fenchel conjugates."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InvalidArgumentError


@dataclass(frozen=True)
class ConvexFn:
    name: str
    f: Callable
    f_prime: Callable
    f_conj: Callable
    f_conj_prime: Callable
    # f*(y) = conj_curvature * y**2 / 2 when the conjugate is a centered quadratic, else None
    conj_curvature: float | None = None

    def fenchel_young_gap(self, x):
        """f(x) + f*(f'(x)) - x f'(x); zero wherever the pair is consistent."""
        y = self.f_prime(x)
        return self.f(x) + self.f_conj(y) - x * y

    def conjugate_by_grid(self, x, deltas):
        """max over a grid of (x * delta - f*(delta)), a numerical f(x)."""
        x = np.atleast_1d(np.asarray(x, float))
        deltas = np.asarray(deltas, float)
        return np.max(x[:, None] * deltas[None, :] - self.f_conj(deltas)[None, :], axis=1)


def _quadratic(name: str, c: float) -> ConvexFn:
    """f(x) = c x^2, so f*(y) = y^2 / (4c)."""
    return ConvexFn(
        name=name,
        f=lambda x: c * np.square(x),
        f_prime=lambda x: 2.0 * c * np.asarray(x, float),
        f_conj=lambda y: np.square(y) / (4.0 * c),
        f_conj_prime=lambda y: np.asarray(y, float) / (2.0 * c),
        conj_curvature=1.0 / (2.0 * c),
    )


HALF_SQUARE = _quadratic("half_square", 0.5)
QUARTER_SQUARE = _quadratic("quarter_square", 0.25)

CONVEX_FNS = {fn.name: fn for fn in (HALF_SQUARE, QUARTER_SQUARE)}


def get_convex_fn(name: str) -> ConvexFn:
    try:
        return CONVEX_FNS[name]
    except KeyError:
        raise InvalidArgumentError(f"unknown convex function {name!r}; known: {sorted(CONVEX_FNS)}") from None
