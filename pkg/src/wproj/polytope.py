"""Box-constrained distribution polytopes and KL projection onto them.

The privacy polytope for a base measure m and budget eps is the set of
probability vectors nu with  e^{-eps/2} m_j <= nu_j <= e^{eps/2} m_j  for
every coordinate.  Any mechanism whose outputs stay inside one such polytope
satisfies eps-local differential privacy.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class InfeasiblePolytopeError(ValueError):
    """The box bounds and the simplex constraint have empty intersection."""


@dataclass(frozen=True)
class Bisection:
    """Scalar bisection controls shared by the projection routines."""

    tol: float = 1e-12
    max_iters: int = 200


DEFAULT_BISECTION = Bisection()


def validate_distribution(x, tol: float = 1e-9) -> np.ndarray:
    """Return ``x`` as a float array after checking it is a probability vector."""
    v = np.asarray(x, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("distribution must be a nonempty 1-d array")
    if np.any(v < -tol) or not np.all(np.isfinite(v)):
        raise ValueError("distribution entries must be finite and nonnegative")
    total = v.sum()
    if abs(total - 1.0) > tol:
        raise ValueError(f"distribution sums to {total!r}, expected 1 within {tol}")
    return v


@dataclass(frozen=True)
class LdpPolytope:
    """Base measure m (nonnegative, not necessarily normalized) and budget epsilon.

    Construction fails if the polytope is empty, i.e. unless
    alpha * sum(m) <= 1 <= beta * sum(m) with alpha = e^{-eps/2}, beta = e^{eps/2}.
    """

    m: np.ndarray = field(repr=False)
    epsilon: float

    def __post_init__(self):
        m = np.asarray(self.m, dtype=float)
        if m.ndim != 1 or m.size == 0:
            raise ValueError("base measure must be a nonempty 1-d array")
        if np.any(m < 0) or not np.all(np.isfinite(m)):
            raise ValueError("base measure entries must be finite and nonnegative")
        if not np.any(m > 0):
            raise ValueError("base measure must have at least one positive entry")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        object.__setattr__(self, "m", m)
        total = m.sum()
        slack = 1e-12 * max(1.0, total)
        if self.alpha * total > 1.0 + slack or self.beta * total < 1.0 - slack:
            raise InfeasiblePolytopeError(
                f"empty polytope: need e^(-eps/2)*sum(m) <= 1 <= e^(eps/2)*sum(m), "
                f"got sum(m)={total!r} with eps={self.epsilon!r}"
            )

    @property
    def alpha(self) -> float:
        return math.exp(-self.epsilon / 2.0)

    @property
    def beta(self) -> float:
        return math.exp(self.epsilon / 2.0)

    @property
    def size(self) -> int:
        return self.m.size

    @property
    def lower(self) -> np.ndarray:
        return self.alpha * self.m

    @property
    def upper(self) -> np.ndarray:
        return self.beta * self.m

    def to_json(self) -> dict:
        return {"m": self.m.tolist(), "epsilon": self.epsilon}

    @classmethod
    def from_json(cls, obj: dict) -> "LdpPolytope":
        return cls(m=np.asarray(obj["m"], dtype=float), epsilon=float(obj["epsilon"]))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))

    @classmethod
    def load(cls, path: str | Path) -> "LdpPolytope":
        return cls.from_json(json.loads(Path(path).read_text()))


def contains(Q: LdpPolytope, nu, tol: float = 1e-9) -> bool:
    """True iff alpha*m_j - tol <= nu_j <= beta*m_j + tol for every coordinate."""
    v = np.asarray(nu, dtype=float)
    if v.shape != Q.m.shape:
        raise ValueError(f"length mismatch: nu has {v.shape}, polytope has {Q.m.shape}")
    return bool(np.all(v >= Q.lower - tol) and np.all(v <= Q.upper + tol))


def kl_project(Q: LdpPolytope, s, bisection: Bisection = DEFAULT_BISECTION) -> np.ndarray:
    """KL projection of a nonnegative vector s onto the polytope.

    Solves  min_{q in Q} sum_j q_j log(q_j / s_j)  via the clipped-exponential
    form  q_j = clip(e^theta * s_j, alpha*m_j, beta*m_j), where theta is found
    by scalar bisection on  psi(theta) = sum_j q_j(theta) = 1.  Coordinates
    with m_j = 0 are forced to exact zero and excluded from the search.

    The returned q satisfies the box bounds exactly (clipping is exact) and
    sums to 1 within the bisection tolerance.
    """
    s = np.asarray(s, dtype=float)
    if s.shape != Q.m.shape:
        raise ValueError(f"length mismatch: s has {s.shape}, polytope has {Q.m.shape}")
    if np.any(s < 0) or not np.all(np.isfinite(s)):
        raise ValueError("s must be finite and nonnegative")
    if not np.any(s > 0):
        raise ValueError("s must have at least one positive entry")

    support = Q.m > 0
    lo = Q.lower[support]
    hi = Q.upper[support]
    ssup = s[support]

    # Already feasible and normalized: the projection is the identity, and
    # returning s unchanged makes repeated projection exactly idempotent.
    if (
        abs(s[~support].sum()) == 0.0
        and abs(ssup.sum() - 1.0) <= 1e-10
        and np.all(ssup >= lo)
        and np.all(ssup <= hi)
    ):
        return s.copy()

    q = np.zeros_like(s)
    q[support] = _clipped_scaling(ssup, lo, hi, bisection)
    return q


def _clipped_scaling(
    s: np.ndarray, lo: np.ndarray, hi: np.ndarray, bisection: Bisection
) -> np.ndarray:
    """Find theta with sum(clip(e^theta * s, lo, hi)) = 1 and return the clipped vector."""
    # Degenerate polytopes where the mass constraint is tight have a single
    # feasible point; return it directly instead of bisecting.
    if lo.sum() >= 1.0:
        return lo.copy()
    if hi.sum() <= 1.0:
        return hi.copy()
    pos = s > 0
    if not np.any(pos):
        raise ValueError("s vanishes on the support of the base measure")
    theta_lo = math.log(lo[lo > 0].min() / s[pos].max()) - 1.0 if np.any(lo > 0) else -1.0
    theta_hi = math.log(hi.max() / s[pos].min()) + 1.0

    def psi(theta: float) -> float:
        return float(np.clip(np.exp(theta) * s, lo, hi).sum())

    # Widen until the bracket is valid; psi is nondecreasing with limits
    # sum(lo) <= 1 <= sum(hi), so a valid bracket always exists.
    while psi(theta_lo) > 1.0 and theta_lo > -1e6:
        theta_lo -= 8.0
    while psi(theta_hi) < 1.0 and theta_hi < 1e6:
        theta_hi += 8.0

    theta = 0.5 * (theta_lo + theta_hi)
    for _ in range(bisection.max_iters):
        theta = 0.5 * (theta_lo + theta_hi)
        val = psi(theta)
        if abs(val - 1.0) <= bisection.tol:
            break
        if val < 1.0:
            theta_lo = theta
        else:
            theta_hi = theta
    return np.clip(np.exp(theta) * s, lo, hi)


def kl_project_log(
    Q_lower: np.ndarray,
    Q_upper: np.ndarray,
    log_s: np.ndarray,
    bisection: Bisection = DEFAULT_BISECTION,
) -> np.ndarray:
    """Log-domain variant of the clipped-scaling projection.

    Takes log(s) instead of s so callers can avoid underflow; the bounds must
    already be restricted to the positive-base-measure support.
    """
    if not np.all(np.isfinite(log_s)):
        raise ValueError("log_s must be finite")
    if Q_lower.sum() >= 1.0:
        return Q_lower.copy()
    if Q_upper.sum() <= 1.0:
        return Q_upper.copy()
    theta_lo = math.log(Q_lower[Q_lower > 0].min()) - log_s.max() - 1.0 if np.any(Q_lower > 0) else -1.0
    theta_hi = math.log(Q_upper.max()) - log_s.min() + 1.0

    def psi(theta: float) -> float:
        # exponent capped: anything past 700 is clipped to the upper bound anyway
        return float(np.clip(np.exp(np.minimum(theta + log_s, 700.0)), Q_lower, Q_upper).sum())

    while psi(theta_lo) > 1.0 and theta_lo > -1e7:
        theta_lo -= 8.0
    while psi(theta_hi) < 1.0 and theta_hi < 1e7:
        theta_hi += 8.0

    theta = 0.5 * (theta_lo + theta_hi)
    for _ in range(bisection.max_iters):
        theta = 0.5 * (theta_lo + theta_hi)
        val = psi(theta)
        if abs(val - 1.0) <= bisection.tol:
            break
        if val < 1.0:
            theta_lo = theta
        else:
            theta_hi = theta
    return np.clip(np.exp(np.minimum(theta + log_s, 700.0)), Q_lower, Q_upper)
