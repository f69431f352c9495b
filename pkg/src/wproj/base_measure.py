"""Worst-case projection cost over point-mass inputs and its minimization.

For base measure m, the worst-case p-th-power transport cost of projecting
any input onto the polytope equals max_i phi_i(m), where phi_i(m) is the
fractional-knapsack value of spending the output mass budget on the cheapest
coordinates of cost row i.  Each phi_i is convex in m with an explicit
subgradient built from the knapsack threshold, so the max is minimized by
exponentiated-gradient mirror descent over the feasible mass interval
[1/beta, 1/alpha].

On the unit sphere with the Euclidean metric, the optimal base measure is a
multiple of the uniform measure; the scale solves a one-dimensional equation
whose pieces are integrals of the cap-height density, computed here by
adaptive quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import quad
from scipy.optimize import minimize_scalar
from scipy.special import gammaln

from .geometry import CostMatrix


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested accuracy."""


@dataclass(frozen=True)
class BaseMeasureProblem:
    """Cost matrix with per-row cost orderings precomputed once."""

    C: CostMatrix
    epsilon: float
    sort_idx: np.ndarray = field(repr=False)
    sorted_costs: np.ndarray = field(repr=False)

    @classmethod
    def from_cost(cls, C: CostMatrix, epsilon: float) -> "BaseMeasureProblem":
        if epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {epsilon}")
        idx = np.argsort(C.costs, axis=1, kind="stable")
        return cls(
            C=C,
            epsilon=epsilon,
            sort_idx=idx,
            sorted_costs=np.take_along_axis(C.costs, idx, axis=1),
        )

    @property
    def alpha(self) -> float:
        return math.exp(-self.epsilon / 2.0)

    @property
    def beta(self) -> float:
        return math.exp(self.epsilon / 2.0)

    @property
    def mass_interval(self) -> tuple[float, float]:
        return 1.0 / self.beta, 1.0 / self.alpha

    @property
    def D_p(self) -> float:
        return self.C.max_cost


def _validate_measure(problem: BaseMeasureProblem, m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.shape != (problem.C.k_v,):
        raise ValueError(f"m has shape {m.shape}, expected ({problem.C.k_v},)")
    if np.any(m < 0) or not np.all(np.isfinite(m)):
        raise ValueError("m must be finite and nonnegative")
    lo, hi = problem.mass_interval
    total = m.sum()
    if total < lo * (1 - 1e-9) or total > hi * (1 + 1e-9):
        raise ValueError(f"total mass {total!r} outside the feasible interval [{lo}, {hi}]")
    return m


def thresholds(problem: BaseMeasureProblem, m) -> np.ndarray:
    """Per-row knapsack threshold costs tau_i(m), by a scan over sorted costs."""
    m = _validate_measure(problem, m)
    a, b = problem.alpha, problem.beta
    budget = 1.0 - a * m.sum()
    msorted = m[problem.sort_idx]
    if budget <= 1e-15:
        # Mass constraint tight at the bottom: every threshold at or below the
        # cheapest positive-mass cost is dual optimal; report that one.
        first = np.argmax(msorted > 0, axis=1)
        return problem.sorted_costs[np.arange(problem.C.k), first]
    cums = (b - a) * np.cumsum(msorted, axis=1)
    idx = np.minimum((cums < budget - 1e-15).sum(axis=1), problem.C.k_v - 1)
    return problem.sorted_costs[np.arange(problem.C.k), idx]


def _phi_values(problem: BaseMeasureProblem, m: np.ndarray, tau: np.ndarray) -> np.ndarray:
    a, b = problem.alpha, problem.beta
    diff = problem.C.costs - tau[:, None]
    return tau + np.where(diff >= 0, a * diff, b * diff) @ m


def worst_case_f(problem: BaseMeasureProblem, m) -> tuple[float, int, np.ndarray]:
    """max_i phi_i(m), the achieving row, and all row thresholds.

    The worst-case Wasserstein utility of the projection mechanism with base
    measure m is the returned value raised to 1/p.
    """
    m = _validate_measure(problem, m)
    tau = thresholds(problem, m)
    phi = _phi_values(problem, m, tau)
    i_star = int(np.argmax(phi))
    return float(phi[i_star]), i_star, tau


def subgradient(problem: BaseMeasureProblem, m) -> np.ndarray:
    """A subgradient of m -> max_i phi_i(m), from the dual of the worst row."""
    _, i_star, tau = worst_case_f(problem, m)
    return _row_subgradient(problem, i_star, tau[i_star])


def _row_subgradient(problem: BaseMeasureProblem, i: int, tau_i: float) -> np.ndarray:
    a, b = problem.alpha, problem.beta
    diff = problem.C.costs[i] - tau_i
    return np.where(diff >= 0, a * diff, b * diff)


@dataclass
class MirrorDescentState:
    m: np.ndarray
    m_bar: np.ndarray
    t: int
    eta: float
    history: list[float]


def optimize_base_measure(
    problem: BaseMeasureProblem,
    T: int,
    eta: float | None = None,
    decaying: bool = False,
) -> tuple[np.ndarray, list[float]]:
    """Minimize the worst-case cost by exponentiated-gradient mirror descent.

    Runs T multiplicative updates m_j <- m_j * exp(-eta * g_j) followed by the
    closed-form mass projection (rescale the total onto [1/beta, 1/alpha]),
    starting from the uniform measure of maximal feasible mass, and returns
    the running average of the iterates together with the per-iterate
    objective values.

    The default stepsize sqrt(2(1+log k)) / (beta * D_p * sqrt(T)) gives the
    standard O(sqrt(log(k)/T)) average-iterate guarantee; ``decaying`` swaps
    in eta/sqrt(t) for an anytime variant.
    """
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    a, b = problem.alpha, problem.beta
    k, k_v = problem.C.k, problem.C.k_v
    if eta is None:
        denom = b * problem.D_p * math.sqrt(T)
        eta = math.sqrt(2.0 * (1.0 + math.log(k))) / denom if denom > 0 else 0.0

    state = MirrorDescentState(
        m=np.full(k_v, 1.0 / (a * k_v)),
        m_bar=np.zeros(k_v),
        t=0,
        eta=eta,
        history=[],
    )
    msum = np.zeros(k_v)
    lo, hi = problem.mass_interval
    for t in range(1, T + 1):
        f_val, i_star, tau = worst_case_f(problem, state.m)
        state.history.append(f_val)
        msum += state.m
        g = _row_subgradient(problem, i_star, tau[i_star])
        step = eta / math.sqrt(t) if decaying else eta
        m_new = state.m * np.exp(-step * g)
        total = m_new.sum()
        if total < lo:
            m_new *= lo / total
        elif total > hi:
            m_new *= hi / total
        state.m = m_new
        state.t = t
    state.m_bar = msum / T
    return state.m_bar, state.history


def best_uniform_scale(problem: BaseMeasureProblem) -> tuple[np.ndarray, float]:
    """Best uniform base measure: minimize the worst-case cost over the scale."""
    k_v = problem.C.k_v
    lo, hi = problem.mass_interval

    def objective(total: float) -> float:
        f_val, _, _ = worst_case_f(problem, np.full(k_v, total / k_v))
        return f_val

    res = minimize_scalar(objective, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    total = float(res.x)
    return np.full(k_v, total / k_v), float(res.fun)


# --- optimal base measure on the unit sphere --------------------------------


@dataclass(frozen=True)
class SphereSolution:
    """Scale of the optimal uniform base measure on the d-sphere."""

    d: int
    p: float
    epsilon: float
    t_star: float
    alpha_star: float


def _log_density_const(d: int) -> float:
    return gammaln((d + 1) / 2.0) - 0.5 * math.log(math.pi) - gammaln(d / 2.0)


def _cap_integral(h, t: float, d: int, tol: float) -> float:
    """integral_t^1 h(u) * C_d * (1-u^2)^((d-2)/2) du, singularity-safe for d < 2."""
    c_d = math.exp(_log_density_const(d))
    if t >= 1.0:
        return 0.0
    if d >= 2:
        val, err = quad(
            lambda u: h(u) * c_d * (1.0 - u * u) ** ((d - 2) / 2.0),
            t,
            1.0,
            epsabs=tol,
            epsrel=1e-10,
            limit=200,
        )
    else:
        # substitute u = cos(theta); the endpoint singularity disappears
        val, err = quad(
            lambda th: h(math.cos(th)) * c_d * math.sin(th) ** (d - 1),
            0.0,
            math.acos(max(t, -1.0)),
            epsabs=tol,
            epsrel=1e-10,
            limit=200,
        )
    if err > 100 * max(tol, 1e-14):
        raise QuadratureError(f"quadrature error estimate {err} exceeds tolerance {tol}")
    return val


def sphere_cap_mass(t: float, d: int, tol: float = 1e-10) -> float:
    """Fraction of the uniform sphere measure in the cap {<x,y> >= t}."""
    return _cap_integral(lambda u: 1.0, t, d, tol)


def sphere_cap_cost(t: float, d: int, p: float, tol: float = 1e-10) -> float:
    """integral of the p-th power distance (2-2u)^{p/2} over the cap density."""
    return _cap_integral(lambda u: (2.0 - 2.0 * u) ** (p / 2.0), t, d, tol)


def sphere_total_cost(d: int, p: float, tol: float = 1e-10) -> float:
    """Full-sphere expectation of the p-th power distance to a fixed point."""
    return sphere_cap_cost(-1.0, d, p, tol)


def sphere_base_measure(
    d: int, p: float, epsilon: float, quad_tol: float = 1e-10, t_tol: float = 1e-13
) -> SphereSolution:
    """Scale of the optimal uniform base measure on the d-dimensional sphere.

    The optimizing cap threshold t* is the unique root in (-1, 1) of the
    strictly increasing function

        G(t) = A*U(t) + B*H - g_p(t) * (B + A*S(t)),

    with A = e^{eps/2} - e^{-eps/2}, B = e^{-eps/2}, S the cap mass, U the cap
    cost, H the full-sphere cost, and g_p(t) = (2-2t)^{p/2}; the scale is then
    1 / (B + A*S(t*)).
    """
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    A = math.exp(epsilon / 2.0) - math.exp(-epsilon / 2.0)
    B = math.exp(-epsilon / 2.0)
    H = sphere_total_cost(d, p, quad_tol)

    def G(t: float) -> float:
        U = sphere_cap_cost(t, d, p, quad_tol)
        S = sphere_cap_mass(t, d, quad_tol)
        return A * U + B * H - (2.0 - 2.0 * t) ** (p / 2.0) * (B + A * S)

    lo, hi = -1.0, 1.0
    # G(-1) = (A+B)(H - 2^p) < 0 and G(1) = B*H > 0, and G increases strictly
    while hi - lo > t_tol:
        mid = 0.5 * (lo + hi)
        if G(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    t_star = 0.5 * (lo + hi)
    alpha_star = 1.0 / (B + A * sphere_cap_mass(t_star, d, quad_tol))
    return SphereSolution(d=d, p=float(p), epsilon=float(epsilon), t_star=t_star, alpha_star=alpha_star)


def sphere_gap_curve(d: int, p: float, epsilon: float, ts) -> np.ndarray:
    """G(t) on a grid, via composite Gauss-Legendre panels in cap-angle space.

    Cheap enough for dense monotonicity checks; agrees with the adaptive
    quadrature used by the root finder to well below its tolerance.
    """
    ts = np.asarray(ts, dtype=float)
    if ts.ndim != 1 or np.any(ts <= -1) or np.any(ts >= 1) or np.any(np.diff(ts) <= 0):
        raise ValueError("ts must be strictly increasing inside (-1, 1)")
    c_d = math.exp(_log_density_const(d))
    A = math.exp(epsilon / 2.0) - math.exp(-epsilon / 2.0)
    B = math.exp(-epsilon / 2.0)

    # integrate from theta = 0 (u = 1) out to each grid angle, then to pi
    thetas = np.concatenate([[0.0], np.arccos(ts)[::-1], [math.pi]])
    nodes, weights = leggauss(16)
    a_edge, b_edge = thetas[:-1], thetas[1:]
    half = 0.5 * (b_edge - a_edge)
    mid = 0.5 * (a_edge + b_edge)
    th = mid[:, None] + half[:, None] * nodes[None, :]
    w = half[:, None] * weights[None, :]
    density = c_d * np.sin(th) ** (d - 1)
    gp = (2.0 - 2.0 * np.cos(th)) ** (p / 2.0)
    panel_S = (density * w).sum(axis=1)
    panel_U = (gp * density * w).sum(axis=1)
    S_at_theta = np.cumsum(panel_S)  # mass of {angle <= theta_edge}
    U_at_theta = np.cumsum(panel_U)
    H = float(U_at_theta[-1])

    # grid angles occupy positions 1..len(ts) of the edge list, in reversed order
    S_grid = S_at_theta[:-1][::-1]
    U_grid = U_at_theta[:-1][::-1]
    gp_grid = (2.0 - 2.0 * ts) ** (p / 2.0)
    return A * U_grid + B * H - gp_grid * (B + A * S_grid)
