"""Revenue-maximizing advertising rules for selling information to Bayesian buyers."""

from .errors import InfoAdvertError, ResourceCapError, SolverError, UndefinedPosteriorError, ValidationError
from .model import (
    AdvertisingRule,
    DecisionProblem,
    MultiTypeInstance,
    PosteriorDecomposition,
    Prospect,
    SingleTypeInstance,
    best_action,
    convert_disclosure,
    cost_of_uncertainty,
    decomposition_to_rule,
    evaluate_rule_multi,
    evaluate_rule_single,
    likelihood_ratio,
    posterior,
    rule_to_decomposition,
    sender_payoff,
)
from .geometry import all_vertices, build_segments, enumerate_vertices
from .single_solver import check_optimality_conditions, merge_gain, solve_binary, solve_concave_closure
from .multi_solver import (
    enumerate_lambda_candidates,
    merge_duplicate_signals,
    realized_purchase_set,
    solve_grid_lp,
)
from .oracle import brute_force_multi, grid_concave_closure, simplex_grid

__version__ = "0.1.0"

__all__ = [
    "AdvertisingRule",
    "DecisionProblem",
    "InfoAdvertError",
    "MultiTypeInstance",
    "PosteriorDecomposition",
    "Prospect",
    "ResourceCapError",
    "SingleTypeInstance",
    "SolverError",
    "UndefinedPosteriorError",
    "ValidationError",
    "all_vertices",
    "best_action",
    "brute_force_multi",
    "build_segments",
    "check_optimality_conditions",
    "convert_disclosure",
    "cost_of_uncertainty",
    "decomposition_to_rule",
    "enumerate_lambda_candidates",
    "enumerate_vertices",
    "evaluate_rule_multi",
    "evaluate_rule_single",
    "grid_concave_closure",
    "likelihood_ratio",
    "merge_duplicate_signals",
    "merge_gain",
    "posterior",
    "realized_purchase_set",
    "rule_to_decomposition",
    "sender_payoff",
    "simplex_grid",
    "solve_binary",
    "solve_concave_closure",
    "solve_grid_lp",
]
