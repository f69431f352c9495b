"""Reference private-sampling mechanisms used for utility comparisons."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import CostMatrix
from .polytope import LdpPolytope, validate_distribution


@dataclass(frozen=True)
class KpmParams:
    """Probability-flooring mechanism on a matched support of size k."""

    k: int
    epsilon: float

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")

    @property
    def floor(self) -> float:
        # 1 / (e^eps + k - 1), written to stay finite for very large eps
        e = math.exp(-self.epsilon)
        return e / (1.0 + (self.k - 1) * e)

    def induced_base_measure(self) -> np.ndarray:
        # e^{eps/2} / (e^eps + k - 1) per coordinate
        e = math.exp(-self.epsilon)
        return np.full(self.k, math.exp(-self.epsilon / 2.0) / (1.0 + (self.k - 1) * e))

    def induced_polytope(self) -> LdpPolytope:
        return LdpPolytope(m=self.induced_base_measure(), epsilon=self.epsilon)


def kpm_transform(params: KpmParams, mu) -> np.ndarray:
    """Floor each probability at 1/(e^eps + k - 1) after dividing by a scalar r.

    r is the unique value making the output sum to one; it is found by
    bisection on the monotone map r -> sum_x max(mu_x / r, floor).
    """
    mu = validate_distribution(mu)
    if mu.size != params.k:
        raise ValueError(f"mu has length {mu.size}, expected k={params.k}")
    floor = params.floor

    def total(r: float) -> float:
        return float(np.maximum(mu / r, floor).sum())

    # total(1) >= 1 and total is nonincreasing in r with limit k*floor < 1
    r_lo, r_hi = 1.0, 2.0
    while total(r_hi) > 1.0:
        r_hi *= 2.0
        if r_hi > 1e12:
            break
    for _ in range(200):
        r = 0.5 * (r_lo + r_hi)
        val = total(r)
        if abs(val - 1.0) <= 1e-13:
            break
        if val > 1.0:
            r_lo = r
        else:
            r_hi = r
    return np.maximum(mu / r, floor)


@dataclass(frozen=True)
class ExpMechParams:
    """Softmax selection scored by negative expected distance to the input.

    ``sensitivity`` is the utility range over neighboring inputs; if None it
    defaults to the global range max_{i,i',j} |d(i,j) - d(i',j)| of the
    expected-distance score.
    """

    C: CostMatrix
    epsilon: float
    sensitivity: float | None = None

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.sensitivity is not None and not self.sensitivity > 0:
            raise ValueError("zero sensitivity")

    def resolved_sensitivity(self) -> float:
        if self.sensitivity is not None:
            return self.sensitivity
        d = self.C.distances()
        return float((d.max(axis=0) - d.min(axis=0)).max())


def exp_mechanism(params: ExpMechParams, mu) -> np.ndarray:
    """Output proportional to exp(eps * u(mu, j) / (2 * sensitivity)).

    The score u(mu, j) = -sum_i mu_i d(i, j) uses raw distances, not their
    p-th powers.  Deterministic as a distribution map.
    """
    mu = validate_distribution(mu)
    if mu.size != params.C.k:
        raise ValueError(f"mu has length {mu.size}, cost matrix has k={params.C.k}")
    d = params.C.distances()
    scores = -(mu @ d)
    delta = params.resolved_sensitivity()
    if delta == 0:
        if scores.max() - scores.min() > 0:
            raise ValueError("zero sensitivity")
        return np.full(params.C.k_v, 1.0 / params.C.k_v)
    z = params.epsilon * scores / (2.0 * delta)
    z -= z.max()
    w = np.exp(z)
    return w / w.sum()
