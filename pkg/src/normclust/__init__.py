"""Approximation algorithms for clustering with an inner and an outer norm."""
from .exceptions import BudgetExceeded, ConfigurationError, DomainError, NormClustError, NotANormError
from .instance import (
    Clustering,
    MetricInstance,
    instance_from_json,
    instance_to_json,
    line_instance,
    load_instance,
    nearest_assignment,
    random_instance,
    solution_cost,
    validate_metric,
)
from .layered_ball import LayeredBallInstance, LayeredBallSolution, lb_cost, reduce_ord_l1, sparsify
from .meta import (
    SolverReport,
    SubroutineRegistry,
    SubroutineResult,
    solve_auto,
    solve_chif,
    solve_chig,
    solve_k_apx,
    solve_ord_l1,
    solve_sym_l1,
)
from .norms import NormSpec, attenuation, evaluate, norm_from_json, ordered_surrogate
from .oracle import OracleBudget, exact_lbkm, exact_mnkc, exact_ncc
from .bipoint import solve_lbkm

__version__ = "0.1.0"

__all__ = [
    "BudgetExceeded", "ConfigurationError", "DomainError", "NormClustError", "NotANormError",
    "Clustering", "MetricInstance", "instance_from_json", "instance_to_json", "line_instance",
    "load_instance", "nearest_assignment", "random_instance", "solution_cost", "validate_metric",
    "LayeredBallInstance", "LayeredBallSolution", "lb_cost", "reduce_ord_l1", "sparsify",
    "SolverReport", "SubroutineRegistry", "SubroutineResult", "solve_auto", "solve_chif",
    "solve_chig", "solve_k_apx", "solve_ord_l1", "solve_sym_l1",
    "NormSpec", "attenuation", "evaluate", "norm_from_json", "ordered_surrogate",
    "OracleBudget", "exact_lbkm", "exact_mnkc", "exact_ncc", "solve_lbkm",
]
