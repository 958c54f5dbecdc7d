"""Sparse multi-marginal optimal transport and free-support barycenters.

The package computes approximate multi-marginal transport plans for N
discrete measures from N - 1 exact two-marginal solves, extracts
free-support Wasserstein-2 barycenters as weighted-mean pushforwards, and
ships an exact LP oracle, certified bound reporting and adversarial
instance generators for verifying the approximation guarantees.
"""

from .measures import (
    Coupling,
    DiscreteMeasure,
    MultiMarginalPlan,
    PlanDiagnostics,
    SimplexWeights,
    marginal_projection,
    pushforward_mean,
    validate_plan,
)
from .solver import (
    OTResult,
    SolverConvergenceError,
    TransportProblem,
    build_cost_matrix,
    solve_ot2,
    solve_ot2_full,
    w2_squared,
)
from .algorithms import (
    glue_pairwise_plans,
    greedy_algorithm,
    randomized_greedy,
    randomized_reference,
    reference_algorithm,
    sparsity_bound,
)
from .oracle import (
    OracleSizeError,
    exact_barycenter,
    exact_mot_lp,
    optimality_side_conditions,
    sorting_property_check,
)
from .analysis import (
    BoundConstants,
    CostReport,
    baseline_best_input,
    baseline_mixture,
    make_report,
    pairwise_lower_bound,
    phi_cost,
    psi_cost,
)
from .estimators import MOTBarycenter

__version__ = "0.1.0"

__all__ = [
    "DiscreteMeasure",
    "SimplexWeights",
    "MultiMarginalPlan",
    "Coupling",
    "PlanDiagnostics",
    "marginal_projection",
    "pushforward_mean",
    "validate_plan",
    "TransportProblem",
    "OTResult",
    "SolverConvergenceError",
    "build_cost_matrix",
    "solve_ot2",
    "solve_ot2_full",
    "w2_squared",
    "reference_algorithm",
    "greedy_algorithm",
    "glue_pairwise_plans",
    "randomized_reference",
    "randomized_greedy",
    "sparsity_bound",
    "exact_mot_lp",
    "exact_barycenter",
    "sorting_property_check",
    "optimality_side_conditions",
    "OracleSizeError",
    "phi_cost",
    "psi_cost",
    "pairwise_lower_bound",
    "baseline_best_input",
    "baseline_mixture",
    "make_report",
    "CostReport",
    "BoundConstants",
    "MOTBarycenter",
]
