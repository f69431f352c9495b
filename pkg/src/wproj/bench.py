"""Benchmark harness: synthetic experiments, worst-case tables, audits.

Runs are fully determined by (config, seed): inputs are drawn from the
counter-based Philox generator and every solver is deterministic, so the
emitted ``results.json`` is byte-identical across repeated runs.  Wall-clock
timings are written to a separate ``timings.json`` to keep the result file
reproducible.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import plots
from .audit import audit_ldp, sample
from .base_measure import (
    BaseMeasureProblem,
    best_uniform_scale,
    optimize_base_measure,
    worst_case_f,
)
from .baselines import ExpMechParams, KpmParams, exp_mechanism, kpm_transform
from .entropic import StoppingRule, entropic_gap_bound, project_entropic
from .exact import project_exact, wasserstein
from .geometry import CostMatrix, Grid, Ring, build_cost_matrix
from .polytope import LdpPolytope

MECHANISMS = ("wpm", "wpm-exact", "kpm", "expmech")
BASE_MEASURE_MODES = ("uniform", "uniform-opt", "kpm", "optimized")
RNG_ALGORITHM = "philox4x64"


@dataclass
class ExperimentConfig:
    kind: str = "ring"
    k: int = 30
    rows: int = 20
    cols: int = 20
    cell_size: float = 1.0
    p: float = 2.0
    epsilons: list[float] = field(default_factory=lambda: [5.0])
    lambdas: list[float] = field(default_factory=lambda: [0.01])
    mechanisms: list[str] = field(default_factory=lambda: ["wpm", "kpm"])
    seed: int = 0
    n_draws: int = 5
    n_users: int = 150
    stop_tol: float = 1e-10
    max_iters: int = 10_000
    base_measure: str = "kpm"
    optimize_iters: int = 2000
    optimize_eta: float | None = None
    run_audit: bool = True
    figures: bool = True

    def __post_init__(self):
        if not self.epsilons or not self.lambdas or not self.mechanisms:
            raise ValueError("epsilons, lambdas, and mechanisms must be nonempty")
        if any(e <= 0 for e in self.epsilons):
            raise ValueError("all epsilons must be positive")
        if any(l < 0 for l in self.lambdas):
            raise ValueError("lambdas must be nonnegative (0 selects the exact solver)")
        bad = [m for m in self.mechanisms if m not in MECHANISMS]
        if bad:
            raise ValueError(f"unknown mechanisms {bad}; choose from {MECHANISMS}")
        if self.base_measure not in BASE_MEASURE_MODES:
            raise ValueError(f"base_measure must be one of {BASE_MEASURE_MODES}")

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentConfig":
        return cls(**obj)

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class ResultRow:
    mechanism: str
    epsilon: float
    lam: float | None
    draw: int
    wasserstein: float
    runtime_ms: float
    iterations: int | None
    gap_vs_exact: float | None
    audit_pass: bool | None = None

    def to_json(self) -> dict:
        # runtime is reported separately so the result file stays reproducible
        d = asdict(self)
        d.pop("runtime_ms")
        return d


def dirichlet_inputs(k: int, n_draws: int, seed: int, concentration: float = 0.1) -> np.ndarray:
    """Sparse random inputs: normalized Gamma(concentration) draws, Philox-seeded."""
    rng = np.random.Generator(np.random.Philox(seed))
    g = rng.gamma(shape=concentration, scale=1.0, size=(n_draws, k))
    g = np.maximum(g, 1e-300)
    return g / g.sum(axis=1, keepdims=True)


def base_measure_for(
    config: ExperimentConfig, C: CostMatrix, epsilon: float
) -> tuple[np.ndarray, dict]:
    """Base measure for the projection mechanism, per the configured mode."""
    k_v = C.k_v
    if config.base_measure == "uniform":
        return np.full(k_v, 1.0 / k_v), {"mode": "uniform"}
    if config.base_measure == "kpm":
        if C.k != k_v:
            raise ValueError("kpm base measure needs matched supports")
        return KpmParams(k=k_v, epsilon=epsilon).induced_base_measure(), {"mode": "kpm"}
    problem = BaseMeasureProblem.from_cost(C, epsilon)
    if config.base_measure == "uniform-opt":
        m, f_val = best_uniform_scale(problem)
        return m, {"mode": "uniform-opt", "f": f_val}
    m_bar, history = optimize_base_measure(problem, config.optimize_iters, eta=config.optimize_eta)
    return m_bar, {"mode": "optimized", "iters": config.optimize_iters, "f": history[-1]}


def make_mechanism(
    name: str,
    C: CostMatrix,
    epsilon: float,
    base_measure: np.ndarray | None = None,
    lam: float = 0.0,
    stop: StoppingRule | None = None,
):
    """Build a distribution-to-distribution transform by name.

    ``identity`` is included as a deliberately non-private control for the
    audit; it is not part of the benchmark mechanism set.
    """
    if name in ("wpm", "wpm-exact"):
        if base_measure is None:
            raise ValueError("projection mechanisms need a base measure")
        Q = LdpPolytope(m=base_measure, epsilon=epsilon)
        if name == "wpm-exact" or lam == 0:
            return lambda mu: project_exact(C, mu, Q)[0]
        return lambda mu: project_entropic(C, mu, Q, lam, stop=stop)[0]
    if name == "kpm":
        if C.k != C.k_v:
            raise ValueError("kpm is defined on matched supports only")
        params = KpmParams(k=C.k, epsilon=epsilon)
        return lambda mu: kpm_transform(params, mu)
    if name == "expmech":
        params = ExpMechParams(C=C, epsilon=epsilon)
        return lambda mu: exp_mechanism(params, mu)
    if name == "identity":
        return lambda mu: np.asarray(mu, dtype=float)
    raise ValueError(f"unknown mechanism {name!r}")


def _meta(config: ExperimentConfig) -> dict:
    return {"config": config.to_json(), "rng": RNG_ALGORITHM}


def run_synthetic_ring(config: ExperimentConfig) -> dict:
    """Ring comparison: per-draw distances to the input plus convergence series."""
    C = build_cost_matrix(Ring(config.k), p=config.p)
    mus = dirichlet_inputs(config.k, config.n_draws, config.seed)
    stop = StoppingRule(tol=config.stop_tol, max_iters=config.max_iters)

    rows: list[ResultRow] = []
    convergence: dict[str, dict] = {}
    distributions: dict[str, list[float]] = {"input": mus[0].tolist()}
    audits: dict[tuple, bool] = {}

    for eps in config.epsilons:
        m, m_meta = base_measure_for(config, C, eps)
        Q = LdpPolytope(m=m, epsilon=eps)
        exact_cache: dict[int, float] = {}

        def exact_w(draw: int) -> float:
            if draw not in exact_cache:
                nu_star, _ = project_exact(C, mus[draw], Q)
                exact_cache[draw] = wasserstein(C, mus[draw], nu_star)
            return exact_cache[draw]

        for name in config.mechanisms:
            lams = config.lambdas if name == "wpm" else [0.0]
            for lam in lams:
                key = (name, eps, lam)
                if config.run_audit:
                    mech = make_mechanism(name, C, eps, base_measure=m, lam=lam, stop=stop)
                    audits[key] = audit_ldp(mech, config.k, eps, extra_inputs=mus).passed
                for draw in range(config.n_draws):
                    t0 = time.perf_counter()
                    iterations = None
                    gap = None
                    if name in ("wpm", "wpm-exact") and lam > 0:
                        nu, report = project_entropic(C, mus[draw], Q, lam, stop=stop)
                        iterations = report.iterations
                        if draw == 0 and name == "wpm":
                            convergence[f"eps={eps}|lam={lam}"] = _convergence_series(
                                C, mus[draw], Q, lam, stop
                            )
                    elif name in ("wpm", "wpm-exact"):
                        nu, _ = project_exact(C, mus[draw], Q)
                    else:
                        nu = make_mechanism(name, C, eps)(mus[draw])
                    w = wasserstein(C, mus[draw], nu)
                    if name in ("wpm", "wpm-exact"):
                        gap = w - exact_w(draw)
                    runtime_ms = 1000 * (time.perf_counter() - t0)
                    rows.append(
                        ResultRow(
                            mechanism=name,
                            epsilon=eps,
                            lam=lam if name == "wpm" else None,
                            draw=draw,
                            wasserstein=w,
                            runtime_ms=runtime_ms,
                            iterations=iterations,
                            gap_vs_exact=gap,
                            audit_pass=audits.get(key),
                        )
                    )
                    if draw == 0 and eps == config.epsilons[0] and name not in distributions:
                        distributions[name] = nu.tolist()

    return {
        "meta": _meta(config) | {"base_measure": config.base_measure},
        "rows": [r.to_json() for r in rows],
        "convergence": convergence,
        "distributions": distributions,
        "gap_bounds": {
            str(lam): entropic_gap_bound(lam, config.k, config.k, config.p)
            for lam in config.lambdas
        },
        "_timings": [
            {"mechanism": r.mechanism, "epsilon": r.epsilon, "lam": r.lam, "draw": r.draw, "runtime_ms": r.runtime_ms}
            for r in rows
        ],
    }


def _convergence_series(C, mu, Q, lam, stop, max_points: int = 60) -> dict:
    """Per-iteration Hilbert residual and distance to the input, subsampled."""
    _, report = project_entropic(C, mu, Q, lam, stop=stop, keep_iterates=True)
    n = len(report.q_iterates)
    if n <= max_points:
        picks = np.arange(n)
    else:
        picks = np.unique(np.linspace(0, n - 1, max_points).round().astype(int))
    return {
        "iteration": [int(t) for t in picks],
        "hilbert_residual": [report.hilbert_residuals[t] for t in picks],
        "wasserstein_to_input": [wasserstein(C, mu, report.q_iterates[t]) for t in picks],
        "iterations_total": report.iterations,
        "birkhoff_c": report.birkhoff_c,
    }


def run_worst_case_table(config: ExperimentConfig) -> dict:
    """Worst-case distance over point-mass inputs, per mechanism and epsilon."""
    if config.kind == "grid":
        space = Grid(config.rows, config.cols, config.cell_size)
    else:
        space = Ring(config.k)
    C = build_cost_matrix(space, p=config.p)
    k = C.k

    rows = []
    for eps in config.epsilons:
        problem = BaseMeasureProblem.from_cost(C, eps)
        names = dict.fromkeys(
            "wpm" if n in ("wpm", "wpm-exact") else n for n in config.mechanisms
        )
        for name in names:
            t0 = time.perf_counter()
            if name == "wpm":
                m_bar, history = optimize_base_measure(
                    problem, config.optimize_iters, eta=config.optimize_eta
                )
                f_val, _, _ = worst_case_f(problem, m_bar)
                a, b = problem.alpha, problem.beta
                regret = (b * problem.D_p / a) * np.sqrt(
                    2 * (1 + np.log(k)) / config.optimize_iters
                )
                rows.append(
                    {
                        "mechanism": "wpm",
                        "epsilon": eps,
                        "utility": f_val ** (1.0 / config.p),
                        "f_value": f_val,
                        "regret_bound_f": regret,
                        "runtime_ms": 1000 * (time.perf_counter() - t0),
                    }
                )
            else:
                mech = make_mechanism(name, C, eps)
                worst = 0.0
                for i in range(k):
                    out = mech(np.eye(k)[i])
                    worst = max(worst, float(C.costs[i] @ out))
                rows.append(
                    {
                        "mechanism": name,
                        "epsilon": eps,
                        "utility": worst ** (1.0 / config.p),
                        "f_value": worst,
                        "runtime_ms": 1000 * (time.perf_counter() - t0),
                    }
                )

    timings = [{"mechanism": r["mechanism"], "epsilon": r["epsilon"], "runtime_ms": r.pop("runtime_ms")} for r in rows]
    return {"meta": _meta(config), "rows": rows, "_timings": timings}


def run_synthetic_grid(config: ExperimentConfig) -> dict:
    """Location-release experiment on a grid with synthetic per-user inputs.

    Each synthetic user holds a smooth bump distribution over cells; one
    private location is sampled per user and the aggregated histogram is
    compared to the true aggregate in transport distance.
    """
    space = Grid(config.rows, config.cols, config.cell_size)
    C = build_cost_matrix(space, p=config.p)
    k = C.k
    users = _bump_users(space, config.n_users, config.seed)
    true_agg = users.mean(axis=0)
    stop = StoppingRule(tol=config.stop_tol, max_iters=config.max_iters)

    rows = []
    estimates: dict[str, np.ndarray] = {}
    for eps in config.epsilons:
        problem = BaseMeasureProblem.from_cost(C, eps)
        m_uniform, _ = best_uniform_scale(problem)
        for name in dict.fromkeys(config.mechanisms):
            lam = config.lambdas[0] if name == "wpm" else 0.0
            mech = make_mechanism(name, C, eps, base_measure=m_uniform, lam=lam, stop=stop)
            t0 = time.perf_counter()
            hist = np.zeros(k)
            for u_idx in range(config.n_users):
                nu = mech(users[u_idx])
                draw = sample(nu, rng_seed=config.seed + 7919 * u_idx, n=1)[0]
                hist[draw] += 1.0
            est = hist / config.n_users
            w = wasserstein(C, true_agg, est)
            rows.append(
                {
                    "mechanism": name,
                    "epsilon": eps,
                    "lam": lam if name == "wpm" else None,
                    "wasserstein": w,
                    "runtime_ms": 1000 * (time.perf_counter() - t0),
                }
            )
            if eps == config.epsilons[0]:
                estimates[name] = est

    timings = [
        {"mechanism": r["mechanism"], "epsilon": r["epsilon"], "runtime_ms": r.pop("runtime_ms")}
        for r in rows
    ]
    return {
        "meta": _meta(config),
        "rows": rows,
        "true_aggregate": true_agg.tolist(),
        "estimates": {name: est.tolist() for name, est in estimates.items()},
        "_timings": timings,
    }


def _bump_users(space: Grid, n_users: int, seed: int) -> np.ndarray:
    rng = np.random.Generator(np.random.Philox(seed))
    centers = space.centers()
    users = np.zeros((n_users, space.size))
    extent = space.cell_size * max(space.rows, space.cols)
    for i in range(n_users):
        c = rng.random(2) * np.array([space.rows, space.cols]) * space.cell_size
        width = (0.05 + 0.15 * rng.random()) * extent
        w = np.exp(-((centers - c) ** 2).sum(axis=1) / (2 * width**2))
        users[i] = w / w.sum()
    return users


def write_outputs(results: dict, out_dir: str | Path, figures: bool = True) -> dict[str, str]:
    """Write results.json (deterministic), timings.json, CSV series, figures."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: dict[str, str] = {}

    timings = results.pop("_timings", [])
    payload = json.dumps(results, sort_keys=True, indent=2) + "\n"
    (out / "results.json").write_text(payload)
    written["results"] = str(out / "results.json")
    (out / "timings.json").write_text(json.dumps({"rows": timings}, indent=2) + "\n")
    written["timings"] = str(out / "timings.json")

    for label, series in results.get("convergence", {}).items():
        safe = label.replace("|", "_").replace("=", "")
        path = out / f"convergence_{safe}.csv"
        with open(path, "w") as fh:
            fh.write("iteration,hilbert_residual,wasserstein_to_input\n")
            for t, h, w in zip(
                series["iteration"], series["hilbert_residual"], series["wasserstein_to_input"]
            ):
                fh.write(f"{t},{h!r},{w!r}\n")
        written[f"convergence:{label}"] = str(path)

    if "rows" in results and results["rows"] and "utility" in results["rows"][0]:
        path = out / "worst_case.csv"
        with open(path, "w") as fh:
            fh.write("mechanism,epsilon,utility\n")
            for r in results["rows"]:
                fh.write(f"{r['mechanism']},{r['epsilon']!r},{r['utility']!r}\n")
        written["table"] = str(path)
    elif "rows" in results:
        path = out / "rows.csv"
        keys = [k for k in results["rows"][0] if k != "audit_pass"]
        with open(path, "w") as fh:
            fh.write(",".join(keys) + "\n")
            for r in results["rows"]:
                fh.write(",".join("" if r.get(k) is None else repr(r.get(k)) for k in keys) + "\n")
        written["rows"] = str(path)

    if figures:
        if "distributions" in results:
            plots.render_ring_comparison(results["distributions"], out / "ring_comparison.png")
            written["fig:ring"] = str(out / "ring_comparison.png")
        if results.get("convergence"):
            plots.render_convergence(results["convergence"], out / "convergence.png")
            written["fig:convergence"] = str(out / "convergence.png")
        if "rows" in results and results["rows"] and "utility" in results["rows"][0]:
            plots.render_worst_case(results["rows"], out / "worst_case.png")
            written["fig:table"] = str(out / "worst_case.png")
        if "true_aggregate" in results:
            meta = results["meta"]["config"]
            plots.render_grid_heatmaps(
                np.asarray(results["true_aggregate"]),
                {k: np.asarray(v) for k, v in results["estimates"].items()},
                meta["rows"],
                meta["cols"],
                out / "grid_estimates.png",
            )
            written["fig:grid"] = str(out / "grid_estimates.png")
    return written
