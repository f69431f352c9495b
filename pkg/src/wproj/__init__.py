"""Locally private sampling by transport-cost projection onto box polytopes.

The library provides the privacy polytope and its KL projection, an exact
flow-based projection solver, a fast entropically regularized solver with
linear-convergence diagnostics, worst-case base-measure optimization,
classical baselines, an empirical privacy audit, and a reproducible
benchmark harness with a CLI (``wproj``).
"""

from .audit import AuditReport, audit_ldp, sample
from .base_measure import (
    BaseMeasureProblem,
    MirrorDescentState,
    SphereSolution,
    best_uniform_scale,
    optimize_base_measure,
    sphere_base_measure,
    subgradient,
    thresholds,
    worst_case_f,
)
from .baselines import ExpMechParams, KpmParams, exp_mechanism, kpm_transform
from .entropic import (
    GibbsKernel,
    KernelUnderflowError,
    SolveReport,
    StoppingRule,
    birkhoff_coefficient,
    entropic_gap_bound,
    gibbs_kernel,
    hilbert_distance,
    project_entropic,
)
from .exact import (
    FlowNetwork,
    TransportPlan,
    build_flow_network,
    min_cost_flow,
    ot_cost,
    project_dirac_closed_form,
    project_exact,
    wasserstein,
)
from .geometry import (
    CostMatrix,
    Grid,
    PointCloud,
    Ring,
    build_cost_matrix,
    load_cost,
    save_cost,
)
from .polytope import (
    Bisection,
    InfeasiblePolytopeError,
    LdpPolytope,
    contains,
    kl_project,
    validate_distribution,
)

__version__ = "0.1.0"

__all__ = [
    "AuditReport",
    "BaseMeasureProblem",
    "Bisection",
    "CostMatrix",
    "ExpMechParams",
    "FlowNetwork",
    "GibbsKernel",
    "Grid",
    "InfeasiblePolytopeError",
    "KernelUnderflowError",
    "KpmParams",
    "LdpPolytope",
    "MirrorDescentState",
    "PointCloud",
    "Ring",
    "SolveReport",
    "SphereSolution",
    "StoppingRule",
    "TransportPlan",
    "audit_ldp",
    "best_uniform_scale",
    "birkhoff_coefficient",
    "build_cost_matrix",
    "build_flow_network",
    "contains",
    "entropic_gap_bound",
    "exp_mechanism",
    "gibbs_kernel",
    "hilbert_distance",
    "kl_project",
    "kpm_transform",
    "load_cost",
    "min_cost_flow",
    "optimize_base_measure",
    "ot_cost",
    "project_dirac_closed_form",
    "project_entropic",
    "project_exact",
    "sample",
    "save_cost",
    "sphere_base_measure",
    "subgradient",
    "thresholds",
    "validate_distribution",
    "wasserstein",
    "worst_case_f",
]
