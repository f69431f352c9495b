"""Command-line interface.

Subcommands
-----------
bench ring|grid|table   synthetic experiments with JSON/CSV output and figures
project                 project a distribution file onto a polytope
optimize-m              mirror-descent search for the worst-case-optimal base measure
sphere-m                closed-form optimal base-measure scale on the unit sphere
audit                   empirical privacy check of a named mechanism
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import bench
from .audit import audit_ldp
from .base_measure import BaseMeasureProblem, optimize_base_measure, sphere_base_measure, worst_case_f
from .entropic import StoppingRule, project_entropic
from .exact import project_exact
from .geometry import Ring, build_cost_matrix, load_cost
from .polytope import LdpPolytope


def _load_vector(path: str) -> np.ndarray:
    """Distribution file: JSON array, JSON {"probs": [...]}, or one value per line."""
    p = Path(path)
    if p.suffix == ".json":
        obj = json.loads(p.read_text())
        if isinstance(obj, dict):
            obj = obj.get("probs", obj.get("m"))
        return np.asarray(obj, dtype=float)
    return np.loadtxt(p, ndmin=1)


def _load_polytope(path: str, epsilon: float | None) -> LdpPolytope:
    """Base-measure file: polytope JSON {"m": ..., "epsilon": ...} or a bare array."""
    p = Path(path)
    if p.suffix == ".json":
        obj = json.loads(p.read_text())
        if isinstance(obj, dict) and "m" in obj:
            eps = epsilon if epsilon is not None else float(obj["epsilon"])
            return LdpPolytope(m=np.asarray(obj["m"], dtype=float), epsilon=eps)
        m = np.asarray(obj, dtype=float)
    else:
        m = np.loadtxt(p, ndmin=1)
    if epsilon is None:
        raise SystemExit("--eps is required when the base-measure file has no epsilon")
    return LdpPolytope(m=m, epsilon=epsilon)


def _emit(obj: dict, out: str | None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text)
        print(f"wrote {out}")
    else:
        sys.stdout.write(text)


def _add_bench_parser(sub) -> None:
    p = sub.add_parser("bench", help="run a benchmark experiment")
    p.add_argument("experiment", choices=["ring", "grid", "table"])
    p.add_argument("--config", help="JSON file with ExperimentConfig fields")
    p.add_argument("--k", type=int)
    p.add_argument("--rows", type=int)
    p.add_argument("--cols", type=int)
    p.add_argument("--p", type=float)
    p.add_argument("--eps", type=float, nargs="+")
    p.add_argument("--lambda", dest="lambdas", type=float, nargs="+")
    p.add_argument("--mechanism", nargs="+", choices=list(bench.MECHANISMS))
    p.add_argument("--seed", type=int)
    p.add_argument("--draws", type=int)
    p.add_argument("--users", type=int)
    p.add_argument("--base-measure", choices=list(bench.BASE_MEASURE_MODES))
    p.add_argument("--optimize-iters", type=int)
    p.add_argument("--optimize-eta", type=float, help="mirror-descent stepsize override")
    p.add_argument("--no-audit", action="store_true")
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("--out", required=True, help="output directory")


def _bench_config(args) -> bench.ExperimentConfig:
    fields = {}
    if args.config:
        fields.update(json.loads(Path(args.config).read_text()))
    overrides = {
        "kind": args.experiment,
        "k": args.k,
        "rows": args.rows,
        "cols": args.cols,
        "p": args.p,
        "epsilons": args.eps,
        "lambdas": args.lambdas,
        "mechanisms": args.mechanism,
        "seed": args.seed,
        "n_draws": args.draws,
        "n_users": args.users,
        "base_measure": args.base_measure,
        "optimize_iters": args.optimize_iters,
        "optimize_eta": args.optimize_eta,
    }
    fields.update({k: v for k, v in overrides.items() if v is not None})
    if args.no_audit:
        fields["run_audit"] = False
    if args.no_figures:
        fields["figures"] = False
    return bench.ExperimentConfig.from_json(fields)


def cmd_bench(args) -> int:
    config = _bench_config(args)
    if args.experiment == "ring":
        results = bench.run_synthetic_ring(config)
    elif args.experiment == "grid":
        results = bench.run_synthetic_grid(config)
    else:
        results = bench.run_worst_case_table(config)
    written = bench.write_outputs(results, args.out, figures=config.figures)
    for label, path in sorted(written.items()):
        print(f"{label}: {path}")
    return 0


def cmd_project(args) -> int:
    C = load_cost(args.cost)
    mu = _load_vector(args.mu)
    Q = _load_polytope(args.m, args.eps)
    if args.lam and args.lam > 0:
        stop = StoppingRule(tol=args.stop_tol, max_iters=args.max_iters)
        nu, report = project_entropic(C, mu, Q, args.lam, stop=stop)
        from .exact import wasserstein

        result = {
            "solver": "entropic",
            "nu": nu.tolist(),
            "wasserstein": wasserstein(C, mu, nu),
            "report": report.to_json(),
        }
    else:
        nu, plan = project_exact(C, mu, Q)
        result = {
            "solver": "exact",
            "nu": nu.tolist(),
            "objective": plan.objective,
            "wasserstein": plan.objective ** (1.0 / C.p),
        }
    _emit(result, args.out)
    return 0


def cmd_optimize_m(args) -> int:
    C = load_cost(args.cost)
    problem = BaseMeasureProblem.from_cost(C, args.eps)
    m_bar, history = optimize_base_measure(problem, args.iters, eta=args.eta)
    f_val, worst_row, _ = worst_case_f(problem, m_bar)
    result = {
        "m": m_bar.tolist(),
        "epsilon": args.eps,
        "f": f_val,
        "utility": f_val ** (1.0 / C.p),
        "worst_row": worst_row,
        "iterations": args.iters,
        "history_first_last": [history[0], history[-1]],
    }
    _emit(result, args.out)
    return 0


def cmd_sphere_m(args) -> int:
    sol = sphere_base_measure(args.d, args.p, args.eps)
    result = {
        "d": sol.d,
        "p": sol.p,
        "epsilon": sol.epsilon,
        "t_star": sol.t_star,
        "alpha_star": sol.alpha_star,
    }
    _emit(result, args.out)
    return 0


def cmd_audit(args) -> int:
    C = build_cost_matrix(Ring(args.k), p=args.p)
    base = np.full(args.k, 1.0 / args.k)
    stop = StoppingRule(tol=args.stop_tol, max_iters=args.max_iters)
    mech = bench.make_mechanism(
        args.mechanism, C, args.eps, base_measure=base, lam=args.lam, stop=stop
    )
    report = audit_ldp(mech, args.k, args.eps)
    _emit(report.to_json(), args.out)
    return 0 if report.passed else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="wproj", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    _add_bench_parser(sub)

    p = sub.add_parser("project", help="project a distribution onto a polytope")
    p.add_argument("--cost", required=True, help="cost matrix file (.csv or .json)")
    p.add_argument("--mu", required=True, help="input distribution file")
    p.add_argument("--m", required=True, help="base measure file (bare array or polytope JSON)")
    p.add_argument("--eps", type=float, help="privacy budget (overrides the file's value)")
    p.add_argument("--lambda", dest="lam", type=float, default=0.0, help="regularization; 0 = exact")
    p.add_argument("--stop-tol", type=float, default=1e-10)
    p.add_argument("--max-iters", type=int, default=10_000)
    p.add_argument("--out")

    p = sub.add_parser("optimize-m", help="optimize the base measure by mirror descent")
    p.add_argument("--cost", required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--iters", type=int, default=2000)
    p.add_argument("--eta", type=float, help="stepsize override")
    p.add_argument("--seed", type=int, default=0, help="recorded only; the search is deterministic")
    p.add_argument("--out")

    p = sub.add_parser("sphere-m", help="optimal base-measure scale on the unit sphere")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--out")

    p = sub.add_parser("audit", help="empirically audit a mechanism's privacy")
    p.add_argument("--mechanism", required=True, choices=list(bench.MECHANISMS) + ["identity"])
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--lambda", dest="lam", type=float, default=0.0, help="0 = exact projection")
    p.add_argument("--stop-tol", type=float, default=1e-10)
    p.add_argument("--max-iters", type=int, default=10_000)
    p.add_argument("--out")

    args = parser.parse_args(argv)
    handlers = {
        "bench": cmd_bench,
        "project": cmd_project,
        "optimize-m": cmd_optimize_m,
        "sphere-m": cmd_sphere_m,
        "audit": cmd_audit,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
