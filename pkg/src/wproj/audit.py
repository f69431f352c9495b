"""Empirical privacy verification and sampling from mechanism outputs.

The audit drives a deterministic distribution-to-distribution mechanism with
every point mass (plus any caller-supplied inputs) and measures the largest
per-coordinate log ratio between outputs.  For mechanisms whose outputs live
in a common box polytope this ratio is the exact finite-space privacy loss;
for arbitrary mechanisms it is an empirical stress test, not a proof.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .polytope import validate_distribution

Mechanism = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class AuditReport:
    """Outcome of one privacy audit.

    ``witness`` is (input_a, input_b, coordinate) for the worst ratio, with
    inputs indexed in evaluation order: the k point masses first, then any
    extra inputs.
    """

    epsilon_claimed: float
    max_log_ratio: float
    witness: tuple[int, int, int]
    passed: bool
    tolerance: float

    def to_json(self) -> dict:
        return {
            "epsilon_claimed": self.epsilon_claimed,
            "max_log_ratio": self.max_log_ratio,
            "witness": {
                "input_a": self.witness[0],
                "input_b": self.witness[1],
                "coordinate": self.witness[2],
            },
            "pass": self.passed,
            "tolerance": self.tolerance,
        }


def audit_ldp(
    mechanism: Mechanism,
    k: int,
    epsilon: float,
    extra_inputs: Sequence[np.ndarray] = (),
    tol: float = 1e-9,
) -> AuditReport:
    """Check the per-coordinate output ratio of a mechanism against e^eps.

    Evaluates the mechanism on all k point masses and on ``extra_inputs``,
    then takes the max over coordinates of log(max_output / min_output).
    A 0/0 coordinate counts as ratio one; positive mass against zero fails
    immediately.  Passing means max_log_ratio <= epsilon + tol.
    """
    inputs = [np.eye(k)[i] for i in range(k)]
    inputs.extend(np.asarray(x, dtype=float) for x in extra_inputs)
    outputs = []
    for x in inputs:
        out = np.asarray(mechanism(x), dtype=float)
        try:
            out = validate_distribution(out)
        except ValueError as exc:
            raise ValueError(f"mechanism output is not a distribution: {exc}") from exc
        outputs.append(out)
    O = np.stack(outputs)  # (n_inputs, k_v)

    max_log_ratio = 0.0
    witness = (0, 0, 0)
    hi = O.max(axis=0)
    lo = O.min(axis=0)
    for j in range(O.shape[1]):
        if hi[j] == 0.0:
            continue  # all mechanisms assign zero here
        a = int(O[:, j].argmax())
        b = int(O[:, j].argmin())
        ratio = np.inf if lo[j] == 0.0 else float(np.log(hi[j]) - np.log(lo[j]))
        if ratio > max_log_ratio:
            max_log_ratio = ratio
            witness = (a, b, j)
    return AuditReport(
        epsilon_claimed=float(epsilon),
        max_log_ratio=max_log_ratio,
        witness=witness,
        passed=bool(max_log_ratio <= epsilon + tol),
        tolerance=tol,
    )


def sample(nu, rng_seed: int, n: int) -> np.ndarray:
    """n i.i.d. index draws from nu by inverse CDF; deterministic given the seed.

    Uses the counter-based Philox generator so draws are reproducible across
    platforms and run orders.
    """
    nu = validate_distribution(nu)
    if n < 0:
        raise ValueError(f"n must be nonnegative, got {n}")
    rng = np.random.Generator(np.random.Philox(rng_seed))
    cdf = np.cumsum(nu)
    u = rng.random(n)
    return np.minimum(np.searchsorted(cdf, u, side="right"), nu.size - 1)
