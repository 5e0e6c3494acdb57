"""degenpde: reduction and solution of linear operator-differential systems
whose leading operator coefficient has a nontrivial null space.

The pipeline: build the generalized Jordan structure of the operator pair
(chains module), turn the singular system into a regular one plus a small
triangular system for the chain coefficients (reduction module), solve the
regular part with a family-specific back-end (solvers module), and drive
everything from JSON problem files (problems module) or the command line
(cli module).
"""

from .chains import (CommutabilityData, CommutabilityResult, JordanStructure,
                     ProjectorSet, build_jordan_chains, build_projectors,
                     certify_operators, commutability_matrix,
                     complete_structure, pseudo_inverse, schmidt_operator,
                     structure_report)
from .errors import (CompatibilityError, ConfigurationError, DegenPDEError,
                     EvaluationError, ParseError, StructureError, UsageError)
from .expressions import evaluate, parse, to_source, variables_of
from .problems import (OracleOutcome, ProblemFile, evaluate_oracle,
                       instantiate, load_problem)
from .reduction import (FAMILIES, DegenerateSystemSpec,
                        DifferentialOperatorSpec, ReducedProblem, ScalarRow,
                        apply_differential_operator, beta_tables,
                        boundary_condition_plan, compat_residual,
                        describe_reduction, reconstruct_solution, reduce,
                        residual_check, rhs_projection, solve_C_recurrence)
from .solvers import (SOLVERS, SolutionField, asymptotic_leading_term,
                      bessel_like_sum, check_spectral_parameter, field_raw,
                      naive_cauchy_defect, oracle_first_order_evolution,
                      oracle_goursat_constant, oracle_second_order_evolution,
                      solve_family, solve_first_order_evolution,
                      solve_goursat, solve_mixed_series,
                      solve_second_order_evolution,
                      solve_third_order_spectral, write_solution_csv)
from .spaces import (FiniteOperator, InnerProductSpace, VectorElement,
                     euclidean_space, grid_space, identity_operator,
                     make_kernel_operator, matrix_operator, mode_space,
                     null_space)

__version__ = "0.1.0"

__all__ = [
    "CommutabilityData", "CommutabilityResult", "JordanStructure",
    "ProjectorSet", "build_jordan_chains", "build_projectors",
    "certify_operators", "commutability_matrix", "complete_structure",
    "pseudo_inverse", "schmidt_operator", "structure_report",
    "CompatibilityError", "ConfigurationError", "DegenPDEError",
    "EvaluationError", "ParseError", "StructureError", "UsageError",
    "evaluate", "parse", "to_source", "variables_of",
    "OracleOutcome", "ProblemFile", "evaluate_oracle", "instantiate",
    "load_problem",
    "FAMILIES", "DegenerateSystemSpec", "DifferentialOperatorSpec",
    "ReducedProblem", "ScalarRow", "apply_differential_operator",
    "beta_tables", "boundary_condition_plan", "compat_residual",
    "describe_reduction", "reconstruct_solution", "reduce", "residual_check",
    "rhs_projection", "solve_C_recurrence",
    "SOLVERS", "SolutionField", "asymptotic_leading_term", "bessel_like_sum",
    "check_spectral_parameter", "field_raw", "naive_cauchy_defect",
    "oracle_first_order_evolution", "oracle_goursat_constant",
    "oracle_second_order_evolution", "solve_family",
    "solve_first_order_evolution", "solve_goursat", "solve_mixed_series",
    "solve_second_order_evolution", "solve_third_order_spectral",
    "write_solution_csv",
    "FiniteOperator", "InnerProductSpace", "VectorElement",
    "euclidean_space", "grid_space", "identity_operator",
    "make_kernel_operator", "matrix_operator", "mode_space", "null_space",
    "__version__",
]
