"""Entropically regularized projection by alternating KL projections.

Replacing the transport cost with its entropy-regularized version turns the
polytope projection into a KL projection of the Gibbs kernel onto the
intersection of the row-marginal constraint and the column-marginal box.
Alternating the two closed-form projections gives a Sinkhorn-style scaling
iteration:

    u = mu / (K v),   s = K^T u,   q = proj_Q(s),   v <- q / s,

whose composite map is a contraction in the Hilbert projective metric with
factor c = tau(K^T) * tau(K), tau being the Birkhoff contraction
coefficient.  The solver reports per-iteration Hilbert residuals so that
linear convergence can be verified, and its output lies in the polytope
exactly (the last step is a polytope projection), so the approximation never
weakens the privacy guarantee.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .geometry import CostMatrix
from .polytope import (
    DEFAULT_BISECTION,
    Bisection,
    LdpPolytope,
    kl_project,
    kl_project_log,
    validate_distribution,
)


class KernelUnderflowError(ValueError):
    """The Gibbs kernel lost entire rows or columns to underflow."""


@dataclass(frozen=True)
class GibbsKernel:
    """Normalized kernel exp(-C/lam) / Z with its log kept alongside."""

    K: np.ndarray = field(repr=False)
    log_K: np.ndarray = field(repr=False)
    lam: float
    log_Z: float


def gibbs_kernel(C: np.ndarray, lam: float) -> GibbsKernel:
    if lam <= 0:
        raise ValueError(f"lam must be positive, got {lam}")
    scaled = -np.asarray(C, dtype=float) / lam
    log_Z = float(logsumexp(scaled))
    log_K = scaled - log_Z
    K = np.exp(log_K)
    return GibbsKernel(K=K, log_K=log_K, lam=lam, log_Z=log_Z)


@dataclass(frozen=True)
class StoppingRule:
    """Stop when the Hilbert step residual drops below tol, or after max_iters."""

    tol: float = 1e-10
    max_iters: int = 10_000


@dataclass
class SolveReport:
    """Per-iteration diagnostics of one scaling solve."""

    iterations: int
    hilbert_residuals: list[float]
    kl_residuals: list[float]
    birkhoff_c: float
    final_marginal_gap: float
    bisection_tolerance: float
    lam: float
    mode: str
    v_iterates: list[np.ndarray] | None = None
    q_iterates: list[np.ndarray] | None = None

    def to_json(self) -> dict:
        return {
            "iterations": self.iterations,
            "hilbert_residuals": self.hilbert_residuals,
            "kl_residuals": self.kl_residuals,
            "birkhoff_c": self.birkhoff_c,
            "final_marginal_gap": self.final_marginal_gap,
            "bisection_tolerance": self.bisection_tolerance,
            "lam": self.lam,
            "mode": self.mode,
        }


def hilbert_distance(x, y) -> float:
    """log(max_i x_i/y_i) - log(min_i x_i/y_i) on strictly positive vectors."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError("vectors must have the same shape")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("Hilbert metric requires strictly positive entries")
    r = np.log(x) - np.log(y)
    return float(r.max() - r.min())


def _delta_from_log(L: np.ndarray) -> float:
    """Log of the maximal cross-ratio, from the entrywise log of the matrix."""
    n, m = L.shape
    if n < 2 or m < 2:
        return 0.0
    delta = 0.0
    for col in range(m):
        diff = L - L[:, col][:, None]
        delta = max(delta, float((diff.max(axis=0) - diff.min(axis=0)).max()))
    return delta


def birkhoff_coefficient(A) -> float:
    """Contraction factor tanh(Delta(A)/4) of x -> Ax in the Hilbert metric."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise ValueError("A must be a matrix")
    if np.any(A <= 0) or not np.all(np.isfinite(A)):
        raise ValueError("Birkhoff coefficient requires strictly positive entries")
    return math.tanh(_delta_from_log(np.log(A)) / 4.0)


def entropic_gap_bound(lam: float, k: int, k_v: int, p: float) -> float:
    """Certified bound (lam * log(k*k_v))**(1/p) on the extra Wasserstein cost.

    The bound comes from the entropy range of couplings on a k x k_v grid;
    it is 0 at lam = 0, where the regularized projection is exact.
    """
    if lam < 0:
        raise ValueError(f"lam must be nonnegative, got {lam}")
    if k < 1 or k_v < 1 or p < 1:
        raise ValueError("need k, k_v >= 1 and p >= 1")
    if lam == 0:
        return 0.0
    return (lam * math.log(k * k_v)) ** (1.0 / p)


def project_entropic(
    C: CostMatrix,
    mu,
    Q: LdpPolytope,
    lam: float,
    stop: StoppingRule | None = None,
    mode: str = "auto",
    bisection: Bisection = DEFAULT_BISECTION,
    keep_iterates: bool = False,
    v0: np.ndarray | None = None,
) -> tuple[np.ndarray, SolveReport]:
    """Approximate polytope projection of mu under entropic regularization.

    Parameters
    ----------
    C : cost matrix (k x k_v).
    mu : input distribution of length k.
    Q : target polytope over the k_v outputs.
    lam : regularization strength, > 0.
    stop : stopping rule; defaults to Hilbert residual 1e-10 or 10000 iters.
    mode : "direct", "log", or "auto" (log-domain when lam < 0.05 * max C).
    keep_iterates : record the v and q iterates in the report, for
        convergence verification.
    v0 : initial positive scaling vector on the restricted support; defaults
        to all ones.  The produced q sequence is invariant to its scale.

    Returns
    -------
    (nu, report) where nu lies in Q exactly; coordinates outside the support
    of the base measure (and of mu, for the rows) are handled by restriction
    and reinserted as exact zeros.
    """
    mu = validate_distribution(mu)
    if mu.size != C.k:
        raise ValueError(f"mu has length {mu.size}, cost matrix has k={C.k}")
    if Q.size != C.k_v:
        raise ValueError(f"base measure has length {Q.size}, cost matrix has k_v={C.k_v}")
    if lam <= 0:
        raise ValueError("lam must be positive; use project_exact for lam = 0")
    stop = stop or StoppingRule()

    rows = mu > 0
    cols = Q.m > 0
    Csub = C.costs[np.ix_(rows, cols)]
    musub = mu[rows]
    lower = Q.lower[cols]
    upper = Q.upper[cols]

    if mode == "auto":
        mode = "log" if lam < 0.05 * max(C.max_cost, 1e-300) else "direct"
    if mode not in ("direct", "log"):
        raise ValueError(f"unknown mode {mode!r}")

    if v0 is None:
        v0 = np.ones(int(cols.sum()))
    else:
        v0 = np.asarray(v0, dtype=float)
        if v0.shape != (int(cols.sum()),) or np.any(v0 <= 0):
            raise ValueError("v0 must be strictly positive over the restricted support")

    kernel = gibbs_kernel(Csub, lam)
    Qsub = LdpPolytope(m=Q.m[cols], epsilon=Q.epsilon)
    if mode == "direct":
        q, extras = _iterate_direct(kernel.K, musub, Qsub, stop, bisection, keep_iterates, v0)
    else:
        q, extras = _iterate_log(kernel.log_K, musub, lower, upper, stop, bisection, keep_iterates, v0)

    c_factor = math.tanh(_delta_from_log(kernel.log_K) / 4.0) * math.tanh(
        _delta_from_log(kernel.log_K.T) / 4.0
    )

    nu = np.zeros(C.k_v)
    nu[cols] = q
    report = SolveReport(
        iterations=extras["iterations"],
        hilbert_residuals=extras["hilbert_residuals"],
        kl_residuals=extras["kl_residuals"],
        birkhoff_c=c_factor,
        final_marginal_gap=extras["final_marginal_gap"],
        bisection_tolerance=bisection.tol,
        lam=lam,
        mode=mode,
        v_iterates=extras.get("v_iterates"),
        q_iterates=extras.get("q_iterates"),
    )
    if keep_iterates and report.q_iterates is not None:
        report.q_iterates = [_embed(qt, cols, C.k_v) for qt in report.q_iterates]
    return nu, report


def _embed(q: np.ndarray, cols: np.ndarray, k_v: int) -> np.ndarray:
    out = np.zeros(k_v)
    out[cols] = q
    return out


def _iterate_direct(K, mu, Qsub, stop, bisection, keep, v0):
    v = v0.copy()
    hilbert_residuals: list[float] = []
    kl_residuals: list[float] = []
    v_list = [v.copy()] if keep else None
    q_list = [] if keep else None
    q_prev = None
    q = None
    u = np.ones(K.shape[0])
    iterations = 0

    for _ in range(stop.max_iters):
        Kv = K @ v
        if np.any(Kv <= 0) or not np.all(np.isfinite(Kv)):
            raise KernelUnderflowError(
                "Gibbs kernel underflowed in direct mode; rerun with mode='log' "
                "(or a larger lam)"
            )
        u = mu / Kv
        s = K.T @ u
        if np.any(s <= 0) or not np.all(np.isfinite(s)):
            raise KernelUnderflowError(
                "scaling vector underflowed in direct mode; rerun with mode='log'"
            )
        q = kl_project(Qsub, s, bisection)
        v_new = q / s
        res = hilbert_distance(v_new, v)
        hilbert_residuals.append(res)
        if q_prev is not None:
            kl_residuals.append(float((q * (np.log(q) - np.log(q_prev))).sum()))
        q_prev = q
        v = v_new
        iterations += 1
        if keep:
            v_list.append(v.copy())
            q_list.append(q.copy())
        if res <= stop.tol:
            break

    gap = float(np.abs(u * (K @ v) - mu).sum())
    out = {
        "iterations": iterations,
        "hilbert_residuals": hilbert_residuals,
        "kl_residuals": kl_residuals,
        "final_marginal_gap": gap,
    }
    if keep:
        out["v_iterates"] = v_list
        out["q_iterates"] = q_list
    return q, out


def _lse(M: np.ndarray, axis: int) -> np.ndarray:
    """Plain log-sum-exp reduction; inputs are always finite here."""
    mx = M.max(axis=axis, keepdims=True)
    return (mx + np.log(np.exp(M - mx).sum(axis=axis, keepdims=True))).reshape(-1)


def _iterate_log(log_K, mu, lower, upper, stop, bisection, keep, v0):
    log_v = np.log(v0)
    log_mu = np.log(mu)
    hilbert_residuals: list[float] = []
    kl_residuals: list[float] = []
    v_list = [np.exp(log_v)] if keep else None
    q_list = [] if keep else None
    q_prev = None
    q = None
    log_u = np.zeros(log_K.shape[0])
    iterations = 0

    for _ in range(stop.max_iters):
        log_Kv = _lse(log_K + log_v[None, :], axis=1)
        log_u = log_mu - log_Kv
        log_s = _lse(log_K + log_u[:, None], axis=0)
        q = kl_project_log(lower, upper, log_s, bisection)
        log_v_new = np.log(q) - log_s
        diff = log_v_new - log_v
        res = float(diff.max() - diff.min())
        hilbert_residuals.append(res)
        if q_prev is not None:
            kl_residuals.append(float((q * (np.log(q) - np.log(q_prev))).sum()))
        q_prev = q
        log_v = log_v_new
        iterations += 1
        if keep:
            with np.errstate(over="ignore"):
                v_list.append(np.exp(log_v))
            q_list.append(q.copy())
        if res <= stop.tol:
            break

    log_row = log_u + _lse(log_K + log_v[None, :], axis=1)
    gap = float(np.abs(np.exp(log_row) - mu).sum())
    out = {
        "iterations": iterations,
        "hilbert_residuals": hilbert_residuals,
        "kl_residuals": kl_residuals,
        "final_marginal_gap": gap,
    }
    if keep:
        out["v_iterates"] = v_list
        out["q_iterates"] = q_list
    return q, out
