"""Optimal approximate and exact experimental designs on finite design
spaces under compound Bayes-risk criteria, via a reduction to constrained
A-optimality and second-order cone programming."""

from .errors import (
    CbrdesignError,
    ConfigError,
    ConvergenceError,
    DomainError,
    InfeasibleError,
    SingularMatrixError,
    TooLargeError,
)
from .model import (
    CbrcProblem,
    ConstraintRow,
    Design,
    DesignSpace,
    FeasibilityReport,
    LinearConstraintSet,
    RegressionMap,
    apply_weights,
    cbrc_term_values,
    cbrc_value,
    check_feasible,
    information_matrix,
)
from .reduction import (
    ArtificialProblem,
    a_criterion_value,
    build_artificial,
    information_matrix_artificial,
    lift_design,
    recover_design,
)
from .socp import (
    ApproximateResult,
    ConicProgram,
    ConicSolution,
    build_a_opt_socp,
    solve,
    solve_approximate,
)
from .exact import BnbResult, round_incumbent, solve_exact
from .rcr import (
    RcrSpec,
    imse_problem,
    line_example,
    linear_prediction_problem,
    slope_dispersion,
    spacing_rows,
    uniform_point_weights,
)
from .oracle import (
    EnumerationResult,
    direct_value,
    enumerate_exact,
    grid_search_2pt,
    random_feasible,
)

__version__ = "0.1.0"

__all__ = [
    "ApproximateResult",
    "ArtificialProblem",
    "BnbResult",
    "CbrcProblem",
    "CbrdesignError",
    "ConfigError",
    "ConicProgram",
    "ConicSolution",
    "ConstraintRow",
    "ConvergenceError",
    "Design",
    "DesignSpace",
    "DomainError",
    "EnumerationResult",
    "FeasibilityReport",
    "InfeasibleError",
    "LinearConstraintSet",
    "RcrSpec",
    "RegressionMap",
    "SingularMatrixError",
    "TooLargeError",
    "a_criterion_value",
    "apply_weights",
    "build_a_opt_socp",
    "build_artificial",
    "cbrc_term_values",
    "cbrc_value",
    "check_feasible",
    "direct_value",
    "enumerate_exact",
    "grid_search_2pt",
    "imse_problem",
    "information_matrix",
    "information_matrix_artificial",
    "lift_design",
    "line_example",
    "linear_prediction_problem",
    "random_feasible",
    "recover_design",
    "round_incumbent",
    "slope_dispersion",
    "solve",
    "solve_approximate",
    "solve_exact",
    "spacing_rows",
    "uniform_point_weights",
    "__version__",
]
