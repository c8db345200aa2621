"""Exception taxonomy for the design machinery.

Every error raised on purpose by this package derives from CbrdesignError,
so callers can catch one type at the boundary.  Numerical routines raise the
specific subclasses below; plain bugs still surface as standard exceptions.
"""


class CbrdesignError(Exception):
    """Base class for all package errors."""


class DomainError(CbrdesignError):
    """Input outside the documented domain of an operation.

    Examples: a non-symmetric matrix where a symmetric one is required,
    mismatched dimensions, a weight vector with negative entries, an
    exact-design request on a problem without integrality.
    """


class SingularMatrixError(CbrdesignError):
    """A matrix required to be (numerically) positive definite is not.

    Carries no special payload; the message names the offending pivot or
    eigenvalue.  Criterion evaluators catch this internally and map it to a
    +inf criterion value, so it escapes only from the low-level routines.
    """


class ConvergenceError(CbrdesignError):
    """An iterative numerical routine failed to converge."""


class InfeasibleError(CbrdesignError):
    """A design or subproblem violates constraints beyond tolerance."""


class TooLargeError(CbrdesignError):
    """A brute-force routine refused to run because the search space is too big."""


class ConfigError(CbrdesignError):
    """A problem description file failed validation.

    The message includes a JSON-path-like location when one is known, e.g.
    ``$.criterion.D: matrix is not square``.
    """

    def __init__(self, message: str, path: str | None = None):
        self.path = path
        if path:
            message = f"{path}: {message}"
        super().__init__(message)
