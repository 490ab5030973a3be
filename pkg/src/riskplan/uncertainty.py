"""Laws of the uncertain obstacle parameter and moment substitution."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from math import comb, prod
from typing import Union

import numpy as np

from .poly_core import PlanePoly, TriPoly


@dataclass(frozen=True)
class Uniform:
    a: float
    b: float

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError(f"uniform needs a < b, got a={self.a}, b={self.b}")

    def moment(self, n: int) -> float:
        a, b = self.a, self.b
        return (b ** (n + 1) - a ** (n + 1)) / ((n + 1) * (b - a))

    def sample(self, rng: np.random.Generator, size=None):
        return rng.uniform(self.a, self.b, size)


@dataclass(frozen=True)
class Gaussian:
    mu: float
    var: float

    def __post_init__(self):
        if not self.var > 0:
            raise ValueError(f"gaussian needs var > 0, got {self.var}")

    def moment(self, n: int) -> float:
        sigma = self.var**0.5
        total = 0.0
        for k in range(0, n + 1, 2):
            # E[Z^k] = (k - 1)!! for even k, zero for odd k
            total += comb(n, k) * self.mu ** (n - k) * sigma**k * prod(range(k - 1, 0, -2))
        return total

    def sample(self, rng: np.random.Generator, size=None):
        return rng.normal(self.mu, self.var**0.5, size)


@dataclass(frozen=True)
class Beta:
    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError(f"beta needs alpha, beta > 0, got {self.alpha}, {self.beta}")

    def moment(self, n: int) -> float:
        return prod((self.alpha + k) / (self.alpha + self.beta + k) for k in range(n))

    def sample(self, rng: np.random.Generator, size=None):
        g1 = rng.gamma(self.alpha, 1.0, size)
        g2 = rng.gamma(self.beta, 1.0, size)
        return g1 / (g1 + g2)


ParamDistribution = Union[Uniform, Gaussian, Beta]


def raw_moment(d: ParamDistribution, n: int) -> float:
    if n < 0:
        raise ValueError("moment order must be non-negative")
    if n == 0:
        return 1.0
    return d.moment(n)


def sample_param(d: ParamDistribution, rng: np.random.Generator, size=None):
    return d.sample(rng, size)


@dataclass(frozen=True)
class UncertainObstacle:
    """Obstacle {(x, y) : poly(x, y, w) >= 0} with w drawn from ``dist``."""

    poly: TriPoly
    dist: ParamDistribution
    name: str

    def __post_init__(self):
        if not self.name:
            raise ValueError("obstacle name must be non-empty")

    @cached_property
    def w_coeffs(self) -> tuple[PlanePoly, ...]:
        return tuple(self.poly.w_coefficients())

    def values_at(self, pt, w: np.ndarray) -> np.ndarray:
        """P(pt, w) for an array of parameter draws."""
        a = [float(c.eval(pt[0], pt[1])) for c in self.w_coeffs]
        acc = np.zeros_like(w, dtype=float)
        for ak in reversed(a):
            acc = acc * w + ak
        return acc


def expect_poly(p: TriPoly, d: ParamDistribution) -> PlanePoly:
    return PlanePoly(
        ((ex, ey), c * raw_moment(d, ew)) for (ex, ey, ew), c in p.terms.items()
    )


def expect_square(p: TriPoly, d: ParamDistribution) -> PlanePoly:
    return expect_poly(p * p, d)
