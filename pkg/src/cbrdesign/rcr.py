"""Design problems for random coefficient regression.

Model: n individuals, m trials each.  Individual i has coefficients
beta_i = beta + b_i with random effects b_i of covariance sigma^2 D, and
observations carry error variance sigma^2.  All individuals share one design
xi with m trials; the quantity of interest is prediction of the individual
responses (or of the mean response surface under a weighting measure).

Both prediction criteria below are compound criteria with two terms:

    linear:  tr(M^{-1} A) + (n - 1) tr((M + D^{-1})^{-1} A)
    IMSE:    same with A = V = sum_x nu(x) f(x) f(x)^T

i.e. terms ((B_1, H_1), (B_2, H_2)) = ((0, A), (D^{-1}, (n-1) A)).

The common variance sigma^2 multiplies the whole criterion and therefore
never changes which design is optimal; the API has no sigma^2 parameter for
that reason, and reported criterion values are per unit sigma^2.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import DomainError, SingularMatrixError
from .model import (
    CbrcProblem,
    ConstraintRow,
    DesignSpace,
    LinearConstraintSet,
    RegressionMap,
)


@dataclass(frozen=True, eq=False)
class RcrSpec:
    """Ingredients of a random coefficient regression design problem.

    regression: fixed-effect regression map f on the design space.
    n_individuals: number of individuals n >= 2 sharing the design.
    trials_per_individual: trial budget m per individual (the total-trials
        value attached to the constraint set).
    dispersion: the p x p matrix D scaling the random-effect covariance
        sigma^2 D; must be symmetric positive definite (a nonsingular
        covariance scale).
    """

    regression: RegressionMap
    n_individuals: int
    trials_per_individual: int
    dispersion: np.ndarray

    def __post_init__(self):
        if self.n_individuals < 2:
            raise DomainError("random coefficient model needs n >= 2 individuals")
        if self.trials_per_individual < 1:
            raise DomainError("trials per individual must be >= 1")
        d = linalg.as_symmetric(self.dispersion, name="D")
        p = self.regression.p
        if d.shape != (p, p):
            raise DomainError(f"D must be {p}x{p}")
        try:
            linalg.cholesky(d)
        except SingularMatrixError as exc:
            raise DomainError("dispersion D must be positive definite") from exc
        object.__setattr__(self, "dispersion", d)

    @property
    def space(self) -> DesignSpace:
        return self.regression.space


def _two_term_problem(spec: RcrSpec, a: np.ndarray) -> CbrcProblem:
    p = spec.regression.p
    a = linalg.as_symmetric(a, name="A")
    if a.shape != (p, p):
        raise DomainError(f"A must be {p}x{p}")
    try:
        linalg.cholesky(a)
    except SingularMatrixError as exc:
        raise DomainError("prediction weighting matrix must be positive definite") from exc
    d_inv = linalg.inverse_spd(spec.dispersion)
    terms = (
        (np.zeros((p, p)), a),
        (d_inv, (spec.n_individuals - 1) * a),
    )
    constraints = LinearConstraintSet(spec.space.size).with_total(
        "=", float(spec.trials_per_individual)
    )
    return CbrcProblem(spec.space, spec.regression, terms, constraints)


def linear_prediction_problem(spec: RcrSpec, a: np.ndarray) -> CbrcProblem:
    """Compound problem for predicting c^T beta_i linear functionals.

    ``a`` is the positive definite weighting matrix of the functionals.
    """
    return _two_term_problem(spec, a)


def imse_problem(spec: RcrSpec, point_weights: np.ndarray) -> CbrcProblem:
    """Compound problem for integrated mean squared error of prediction.

    point_weights: nonnegative weights nu over the design points of the
    weighting measure; V = sum_x nu(x) f(x) f(x)^T must be positive definite
    (so nu must put mass on enough points).
    """
    nu = np.asarray(point_weights, dtype=float).reshape(-1)
    if nu.shape[0] != spec.space.size:
        raise DomainError("need one weight per design point")
    if np.any(nu < 0):
        raise DomainError("IMSE point weights must be nonnegative")
    f = spec.regression.matrix
    v = f.T @ (nu[:, None] * f)
    return _two_term_problem(spec, 0.5 * (v + v.T))


def uniform_point_weights(space: DesignSpace) -> np.ndarray:
    """The uniform weighting measure nu(x) = 1/d over a design space."""
    return np.full(space.size, 1.0 / space.size)


def spacing_rows(npoints: int, window: int = 3, cap: float = 1.0) -> tuple[ConstraintRow, ...]:
    """Rows limiting each run of ``window`` consecutive points to ``cap`` trials.

    One row per window position: w_k + ... + w_{k+window-1} <= cap.
    """
    if window < 1 or window > npoints:
        raise DomainError("window must be between 1 and the number of points")
    rows = []
    for k in range(npoints - window + 1):
        coef = np.zeros(npoints)
        coef[k : k + window] = 1.0
        rows.append(ConstraintRow(coef, "<=", float(cap), name=f"spacing[{k}]"))
    return tuple(rows)


def line_example(
    rho: float,
    spaced: bool = False,
    num_points: int = 51,
    n_individuals: int = 100,
    trials_per_individual: int = 10,
    intercept_dispersion: float = 0.01,
) -> CbrcProblem:
    """Built-in IMSE example: straight-line regression on an equispaced grid.

    f(x) = (1, x) on num_points equally spaced points of [0, 1], uniform
    IMSE weighting, D = diag(intercept_dispersion, delta), where the slope
    dispersion delta is parametrized through rho = delta / (1 + delta) in
    (0, 1); rho close to 0 means slopes nearly identical across individuals,
    rho close to 1 means they barely share information.

    With ``spaced`` set, adds the rows forbidding more than one trial in any
    three consecutive grid points.
    """
    if not 0.0 < rho < 1.0:
        raise DomainError("rho must lie strictly between 0 and 1")
    if num_points < 3:
        raise DomainError("the line example needs at least 3 grid points")
    delta = rho / (1.0 - rho)
    space = DesignSpace.grid_1d(0.0, 1.0, num_points)
    regression = RegressionMap.polynomial(space, 1)
    spec = RcrSpec(
        regression=regression,
        n_individuals=n_individuals,
        trials_per_individual=trials_per_individual,
        dispersion=np.diag([intercept_dispersion, delta]),
    )
    problem = imse_problem(spec, uniform_point_weights(space))
    if spaced:
        constraints = LinearConstraintSet(
            space.size,
            rows=spacing_rows(space.size, 3, 1.0),
            total_trials=("=", float(trials_per_individual)),
        )
        problem = problem.with_constraints(constraints)
    return problem


def slope_dispersion(rho: float) -> float:
    """delta = rho / (1 - rho), the slope dispersion at correlation-like rho."""
    if not 0.0 < rho < 1.0:
        raise DomainError("rho must lie strictly between 0 and 1")
    return rho / (1.0 - rho)
