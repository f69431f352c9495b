"""Shared helpers: random instance generation and an independent LP oracle."""

import numpy as np
import pytest
from scipy.optimize import linprog

from wproj.geometry import CostMatrix
from wproj.polytope import LdpPolytope


def random_feasible_measure(rng, k_v, epsilon):
    """Random nonnegative base measure whose total mass keeps the polytope nonempty."""
    alpha, beta = np.exp(-epsilon / 2), np.exp(epsilon / 2)
    direction = rng.dirichlet(np.ones(k_v))
    mass = rng.uniform(1.0 / beta, 1.0 / alpha)
    return direction * mass


def random_instance(rng, k_max=8, kv_max=8, eps_range=(0.5, 5.0), cost_scale=5.0, p=2.0):
    """Random (CostMatrix, mu, Q) triple with a nonempty polytope."""
    k = int(rng.integers(1, k_max + 1))
    k_v = int(rng.integers(1, kv_max + 1))
    costs = rng.uniform(0.0, cost_scale, size=(k, k_v))
    mu = rng.dirichlet(np.ones(k))
    epsilon = float(rng.uniform(*eps_range))
    Q = LdpPolytope(m=random_feasible_measure(rng, k_v, epsilon), epsilon=epsilon)
    return CostMatrix(costs=costs, p=p), mu, Q


def lp_projection_oracle(costs, mu, Q):
    """Brute-force LP for the polytope projection, via HiGHS dense simplex.

    Independent of the flow solver: the full coupling is the variable vector,
    with explicit row-sum equalities and column-sum box inequalities.
    """
    k, k_v = costs.shape
    A_eq = np.zeros((k, k * k_v))
    for i in range(k):
        A_eq[i, i * k_v : (i + 1) * k_v] = 1.0
    A_ub = np.zeros((2 * k_v, k * k_v))
    for j in range(k_v):
        A_ub[j, j::k_v] = 1.0
        A_ub[k_v + j, j::k_v] = -1.0
    b_ub = np.concatenate([Q.upper, -Q.lower])
    res = linprog(
        costs.ravel(),
        A_ub=A_ub,
        b_ub=b_ub,
        A_eq=A_eq,
        b_eq=mu,
        bounds=(0, None),
        method="highs",
    )
    if res.status != 0:
        raise RuntimeError(f"oracle LP failed: {res.message}")
    return float(res.fun)


def sample_polytope_point(rng, Q, max_tries=20000):
    """Rejection-sample a feasible distribution from the polytope."""
    width = Q.upper - Q.lower
    slack = 1.0 - Q.lower.sum()
    for _ in range(max_tries):
        w = rng.dirichlet(np.ones(Q.size))
        q = Q.lower + w * slack
        if np.all(q <= Q.upper + 1e-15):
            return q
    pytest.skip("could not rejection-sample a polytope point")


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
