"""Exact projection onto the privacy polytope as a minimum-cost flow.

The projection LP

    min sum_ij C_ij pi_ij   s.t.  pi >= 0,  pi @ 1 = mu,
                                  alpha*m_j <= (pi^T @ 1)_j <= beta*m_j

is a min-cost flow on a bipartite network: a source feeding each input node
with exactly mu_i, a transport arc (i, j) of cost C_ij per unit, and an arc
from each output node to the sink with capacity [alpha*m_j, beta*m_j].  The
lower bounds are removed by the usual transformation (the mandatory part of
each bounded arc becomes a node deficit) and the residual problem is solved
by successive shortest augmenting paths with node potentials.

The same routine with a degenerate box (lower = upper = nu) computes plain
optimal transport between fixed marginals, which is how Wasserstein
distances are evaluated everywhere in this package.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import CostMatrix
from .polytope import LdpPolytope, validate_distribution

_RESIDUAL_EPS = 1e-15


@dataclass(frozen=True)
class FlowNetwork:
    """Bipartite transport network with fixed supplies and box demands."""

    costs: np.ndarray = field(repr=False)
    supply: np.ndarray = field(repr=False)
    demand_lower: np.ndarray = field(repr=False)
    demand_upper: np.ndarray = field(repr=False)

    def __post_init__(self):
        k, k_v = self.costs.shape
        if self.supply.shape != (k,) or self.demand_lower.shape != (k_v,):
            raise ValueError("network dimensions are inconsistent")
        total = self.supply.sum()
        slack = 1e-9 * max(1.0, total)
        if self.demand_lower.sum() > total + slack or self.demand_upper.sum() < total - slack:
            raise ValueError("demand box cannot absorb the total supply")


@dataclass(frozen=True)
class TransportPlan:
    """Coupling matrix with its transport objective sum(C * pi)."""

    pi: np.ndarray = field(repr=False)
    objective: float


def build_flow_network(C: CostMatrix, mu, Q: LdpPolytope) -> FlowNetwork:
    mu = validate_distribution(mu)
    if mu.size != C.k:
        raise ValueError(f"mu has length {mu.size}, cost matrix has k={C.k}")
    if Q.size != C.k_v:
        raise ValueError(f"base measure has length {Q.size}, cost matrix has k_v={C.k_v}")
    return FlowNetwork(
        costs=C.costs, supply=mu, demand_lower=Q.lower, demand_upper=Q.upper
    )


def min_cost_flow(net: FlowNetwork) -> TransportPlan:
    """Solve the network by successive shortest paths; returns the optimal plan."""
    C = net.costs
    k, k_v = C.shape
    n = k + k_v + 1  # supplies, demands, sink
    T = k + k_v

    excess = net.supply.copy()
    deficit_v = net.demand_lower.copy()
    cap_vt = net.demand_upper - net.demand_lower
    deficit_t = float(net.supply.sum() - net.demand_lower.sum())

    pi = np.zeros((k, k_v))
    flow_vt = np.zeros(k_v)
    pot = np.zeros(n)

    max_rounds = 50 * (k + k_v) + 200
    for _ in range(max_rounds):
        remaining = deficit_v.sum() + max(deficit_t, 0.0)
        if remaining <= 1e-13:
            break

        dist = np.full(n, np.inf)
        parent = np.full(n, -1, dtype=np.int64)
        visited = np.zeros(n, dtype=bool)
        dist[:k][excess > _RESIDUAL_EPS] = 0.0

        is_target = np.zeros(n, dtype=bool)
        is_target[k:T][deficit_v > _RESIDUAL_EPS] = True
        is_target[T] = deficit_t > _RESIDUAL_EPS

        target = -1
        while True:
            d_open = np.where(visited, np.inf, dist)
            x = int(np.argmin(d_open))
            if not np.isfinite(d_open[x]):
                break
            visited[x] = True
            if is_target[x]:
                target = x
                break
            if x < k:
                # forward transport arcs i -> all j
                w = np.maximum(C[x] + pot[x] - pot[k:T], 0.0)
                cand = dist[x] + w
                better = cand < dist[k:T]
                dist[k:T][better] = cand[better]
                parent[k:T][better] = x
            elif x < T:
                j = x - k
                # reverse transport arcs j -> i where pi_ij > 0
                rev = pi[:, j] > _RESIDUAL_EPS
                if np.any(rev):
                    w = np.maximum(-C[:, j] + pot[x] - pot[:k], 0.0)
                    cand = dist[x] + w
                    better = rev & (cand < dist[:k])
                    dist[:k][better] = cand[better]
                    parent[:k][better] = x
                # slack arc j -> sink
                if cap_vt[j] - flow_vt[j] > _RESIDUAL_EPS:
                    w = max(pot[x] - pot[T], 0.0)
                    if dist[x] + w < dist[T]:
                        dist[T] = dist[x] + w
                        parent[T] = x
            else:
                # reverse slack arcs sink -> j where flow_vt > 0
                rev = flow_vt > _RESIDUAL_EPS
                if np.any(rev):
                    w = np.maximum(pot[T] - pot[k:T], 0.0)
                    cand = dist[T] + w
                    better = rev & (cand < dist[k:T])
                    dist[k:T][better] = cand[better]
                    parent[k:T][better] = T

        if target < 0:
            if remaining <= 1e-9:
                break  # only rounding dust is left unmatched
            raise RuntimeError(
                "flow network disconnected before all demands were met; "
                "the instance is infeasible beyond rounding"
            )

        # trace the augmenting path back to its origin supply node
        path = [target]
        while parent[path[-1]] >= 0:
            path.append(int(parent[path[-1]]))
        path.reverse()
        origin = path[0]

        bottleneck = min(
            excess[origin],
            deficit_v[target - k] if k <= target < T else deficit_t,
        )
        for a, b in zip(path[:-1], path[1:]):
            if a < k:  # forward transport arc, uncapacitated
                continue
            if a < T and b < k:
                bottleneck = min(bottleneck, pi[b, a - k])
            elif a < T and b == T:
                bottleneck = min(bottleneck, cap_vt[a - k] - flow_vt[a - k])
            else:  # a == T, b is a demand node
                bottleneck = min(bottleneck, flow_vt[b - k])

        for a, b in zip(path[:-1], path[1:]):
            if a < k:
                pi[a, b - k] += bottleneck
            elif a < T and b < k:
                pi[b, a - k] -= bottleneck
            elif a < T and b == T:
                flow_vt[a - k] += bottleneck
            else:
                flow_vt[b - k] -= bottleneck

        excess[origin] -= bottleneck
        if target == T:
            deficit_t -= bottleneck
        else:
            deficit_v[target - k] -= bottleneck

        pot += np.minimum(dist, dist[target])
    else:
        raise RuntimeError("min-cost flow did not terminate within the round budget")

    np.clip(pi, 0.0, None, out=pi)
    return TransportPlan(pi=pi, objective=float((C * pi).sum()))


def project_exact(C: CostMatrix, mu, Q: LdpPolytope) -> tuple[np.ndarray, TransportPlan]:
    """Cost-minimizing output distribution inside the polytope, with its plan.

    Returns ``(nu, plan)`` where nu is the column marginal of the optimal
    coupling and ``plan.objective`` equals the p-th power of the Wasserstein
    distance from the output to the input.
    """
    net = build_flow_network(C, mu, Q)
    plan = min_cost_flow(net)
    nu = plan.pi.sum(axis=0)
    return nu, plan


def ot_cost(C: CostMatrix, mu, nu) -> float:
    """Optimal transport cost sum(C * pi) between two fixed marginals."""
    mu = validate_distribution(mu)
    nu = validate_distribution(nu)
    if mu.size != C.k or nu.size != C.k_v:
        raise ValueError("marginal lengths do not match the cost matrix")
    net = FlowNetwork(costs=C.costs, supply=mu, demand_lower=nu, demand_upper=nu)
    return min_cost_flow(net).objective


def wasserstein(C: CostMatrix, mu, nu) -> float:
    """W_p between two distributions under the cost matrix's metric and power."""
    return ot_cost(C, mu, nu) ** (1.0 / C.p)


def project_dirac_closed_form(C_row, Q: LdpPolytope) -> tuple[float, np.ndarray, float]:
    """Projection cost of a point mass, by the fractional-knapsack greedy.

    Every output coordinate receives its mandatory mass alpha*m_j; the
    remaining budget is spent on extra capacity (beta-alpha)*m_j in ascending
    cost order, splitting exactly at the threshold item.  Returns
    ``(phi, nu, tau)``: the optimal cost, the optimizing distribution, and
    the threshold cost at which the budget runs out.

    Ties are broken by (cost, index) with a stable sort, which pins nu even
    though phi is unaffected.
    """
    c = np.asarray(C_row, dtype=float)
    if c.ndim != 1 or c.size != Q.size:
        raise ValueError(f"cost row has shape {c.shape}, polytope has size {Q.size}")
    if np.any(c < 0) or not np.all(np.isfinite(c)):
        raise ValueError("costs must be finite and nonnegative")

    nu = Q.lower.copy()
    budget = 1.0 - nu.sum()
    support = Q.m > 0
    if budget <= 0.0:
        # Mass constraint tight at the bottom: alpha*m is the only feasible
        # point and any threshold below the cheapest support cost is dual
        # optimal; report the cheapest one.
        tau = float(c[support].min())
        return float(c @ nu), nu, tau

    order = np.argsort(c, kind="stable")
    extra = (Q.upper - Q.lower)[order]
    cum = np.cumsum(extra)
    idx = int(np.searchsorted(cum, budget - 1e-15))
    if idx >= order.size:
        idx = order.size - 1
    taken = cum[idx - 1] if idx > 0 else 0.0
    nu[order[:idx]] += extra[:idx]
    nu[order[idx]] += max(0.0, min(budget - taken, extra[idx]))
    tau = float(c[order[idx]])
    return float(c @ nu), nu, tau
