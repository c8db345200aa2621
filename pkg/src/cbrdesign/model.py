"""Design spaces, designs, constraints, and the compound risk criterion.

A design assigns a nonnegative weight to every point of a finite design
space.  Exact designs have integer weights (trial counts); approximate
designs are unnormalized nonnegative reals.  The criterion evaluated here is

    Phi(xi) = sum_j tr( (M(xi) + B_j)^{-1} H_j ),

with M(xi) the information matrix of the design, each B_j symmetric
nonnegative definite and each H_j symmetric positive definite.  Phi is +inf
whenever some M(xi) + B_j is numerically singular.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from . import linalg
from .errors import DomainError, SingularMatrixError

#: Default absolute tolerance for constraint feasibility checks.
FEASIBILITY_TOL = 1e-7

#: How close to an integer an exact design's weights must be.
EXACTNESS_TOL = 1e-9


def _readonly(a: np.ndarray) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class DesignSpace:
    """Finite list of labeled design points.

    labels: unique point names, used in reports and CSV headers.
    coords: (npoints, coord_dim) array of point coordinates.
    """

    labels: tuple[str, ...]
    coords: np.ndarray

    def __post_init__(self):
        labels = tuple(str(s) for s in self.labels)
        object.__setattr__(self, "labels", labels)
        coords = np.atleast_2d(np.asarray(self.coords, dtype=float))
        if coords.shape[0] != len(labels):
            raise DomainError(
                f"coords has {coords.shape[0]} rows for {len(labels)} labels"
            )
        if len(labels) == 0:
            raise DomainError("design space must contain at least one point")
        if len(set(labels)) != len(labels):
            raise DomainError("design point labels must be unique")
        object.__setattr__(self, "coords", _readonly(coords))

    @property
    def size(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise DomainError(f"unknown design point {label!r}") from None

    @classmethod
    def from_coords(cls, coords, labels: Sequence[str] | None = None) -> "DesignSpace":
        coords = np.atleast_2d(np.asarray(coords, dtype=float))
        if coords.shape[0] == 1 and coords.shape[1] > 1:
            # a flat list of scalars is a 1-d space, not one high-dim point
            coords = coords.T
        if labels is None:
            if coords.shape[1] == 1:
                labels = tuple(f"{x:g}" for x in coords[:, 0])
            else:
                labels = tuple(
                    "(" + ",".join(f"{v:g}" for v in row) + ")" for row in coords
                )
        return cls(tuple(labels), coords)

    @classmethod
    def grid_1d(cls, start: float, stop: float, num: int) -> "DesignSpace":
        """Equally spaced 1-d grid of ``num`` points from start to stop inclusive."""
        if num < 1:
            raise DomainError("grid needs at least one point")
        return cls.from_coords(np.linspace(start, stop, num).reshape(-1, 1))

    def same_as(self, other: "DesignSpace") -> bool:
        return self.labels == other.labels and np.array_equal(self.coords, other.coords)


def _require_same_space(a: DesignSpace, b: DesignSpace, what: str) -> None:
    if a is not b and not a.same_as(b):
        raise DomainError(f"{what} is defined on a different design space")


@dataclass(frozen=True, eq=False)
class Design:
    """Nonnegative weights over the points of a design space.

    Weights are not normalized; for exact designs they are trial counts.
    Tiny negative entries (above -1e-9) from solvers are clipped to zero.
    """

    space: DesignSpace
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if w.shape[0] != self.space.size:
            raise DomainError(
                f"{w.shape[0]} weights for a space of {self.space.size} points"
            )
        if np.any(w < -1e-9):
            raise DomainError("design weights must be nonnegative")
        w = np.maximum(w, 0.0)
        object.__setattr__(self, "weights", _readonly(w))

    def total(self) -> float:
        return float(np.sum(self.weights))

    def support(self, tol: float = 1e-12) -> tuple[int, ...]:
        return tuple(int(i) for i in np.nonzero(self.weights > tol)[0])

    def is_exact(self, tol: float = EXACTNESS_TOL) -> bool:
        return bool(np.all(np.abs(self.weights - np.round(self.weights)) <= tol))

    def rounded(self) -> "Design":
        return Design(self.space, np.round(self.weights))

    def as_dict(self, keep_zero: bool = False) -> dict[str, float]:
        out = {}
        for lab, w in zip(self.space.labels, self.weights):
            if keep_zero or w > 0:
                out[lab] = float(w)
        return out

    @classmethod
    def from_dict(cls, space: DesignSpace, weights: dict[str, float]) -> "Design":
        w = np.zeros(space.size)
        for lab, val in weights.items():
            w[space.index(lab)] = float(val)
        return cls(space, w)


@dataclass(frozen=True, eq=False)
class RegressionMap:
    """Regression function on a design space, stored as its value matrix.

    matrix: (npoints, p) array whose row i is f(x_i).  The rows must span
    R^p, otherwise no design on this space can ever be informative enough
    and the criterion is identically +inf.
    """

    space: DesignSpace
    matrix: np.ndarray

    def __post_init__(self):
        f = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        if f.shape[0] != self.space.size:
            raise DomainError(
                f"regression matrix has {f.shape[0]} rows for {self.space.size} points"
            )
        if f.shape[1] < 1:
            raise DomainError("regression dimension must be >= 1")
        if np.linalg.matrix_rank(f) < f.shape[1]:
            raise DomainError("regression vectors do not span the parameter space")
        object.__setattr__(self, "matrix", _readonly(f))

    @property
    def p(self) -> int:
        return int(self.matrix.shape[1])

    def __call__(self, i: int) -> np.ndarray:
        return self.matrix[i]

    @classmethod
    def from_function(
        cls, space: DesignSpace, fn: Callable[[np.ndarray], Iterable[float]]
    ) -> "RegressionMap":
        rows = [np.asarray(fn(space.coords[i]), dtype=float).reshape(-1) for i in range(space.size)]
        return cls(space, np.vstack(rows))

    @classmethod
    def polynomial(cls, space: DesignSpace, degree: int) -> "RegressionMap":
        """Monomial basis (1, x, ..., x^degree) on a 1-d design space."""
        if space.coords.shape[1] != 1:
            raise DomainError("polynomial regression requires a 1-d design space")
        if degree < 0:
            raise DomainError("polynomial degree must be >= 0")
        x = space.coords[:, 0]
        return cls(space, np.vander(x, degree + 1, increasing=True))


@dataclass(frozen=True, eq=False)
class ConstraintRow:
    """One linear constraint  coefficients . w  (relation)  rhs."""

    coefficients: np.ndarray
    relation: str
    rhs: float
    name: str = ""

    def __post_init__(self):
        if self.relation not in ("<=", "=", ">="):
            raise DomainError(f"unknown relation {self.relation!r}")
        c = np.asarray(self.coefficients, dtype=float).reshape(-1)
        object.__setattr__(self, "coefficients", _readonly(c))
        object.__setattr__(self, "rhs", float(self.rhs))

    def residual(self, w: np.ndarray) -> float:
        """Signed violation amount: positive means the row is violated."""
        lhs = float(self.coefficients @ w)
        if self.relation == "<=":
            return lhs - self.rhs
        if self.relation == ">=":
            return self.rhs - lhs
        return abs(lhs - self.rhs)


@dataclass(frozen=True, eq=False)
class LinearConstraintSet:
    """Linear restrictions on design weights.

    rows: general linear rows over the weight vector.
    total_trials: optional (relation, value) pair constraining sum(w).
    lower / upper: per-point bounds; lower defaults to 0, upper to +inf.
    integrality: when True, designs must have integer weights (exact mode).
    """

    npoints: int
    rows: tuple[ConstraintRow, ...] = ()
    total_trials: tuple[str, float] | None = None
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    integrality: bool = False

    def __post_init__(self):
        n = int(self.npoints)
        if n < 1:
            raise DomainError("constraint set needs npoints >= 1")
        object.__setattr__(self, "npoints", n)
        rows = tuple(self.rows)
        for r in rows:
            if r.coefficients.shape[0] != n:
                raise DomainError(
                    f"constraint row {r.name or '?'} has "
                    f"{r.coefficients.shape[0]} coefficients, expected {n}"
                )
        object.__setattr__(self, "rows", rows)
        if self.total_trials is not None:
            rel, val = self.total_trials
            if rel not in ("<=", "=", ">="):
                raise DomainError(f"unknown relation {rel!r} in total_trials")
            object.__setattr__(self, "total_trials", (rel, float(val)))
        lo = np.zeros(n) if self.lower is None else np.asarray(self.lower, dtype=float).reshape(-1)
        hi = np.full(n, np.inf) if self.upper is None else np.asarray(self.upper, dtype=float).reshape(-1)
        if lo.shape[0] != n or hi.shape[0] != n:
            raise DomainError("bound vectors must have one entry per design point")
        if np.any(lo < 0):
            raise DomainError("lower bounds must be nonnegative")
        object.__setattr__(self, "lower", _readonly(lo))
        object.__setattr__(self, "upper", _readonly(hi))

    @classmethod
    def unconstrained(cls, npoints: int) -> "LinearConstraintSet":
        return cls(npoints)

    def with_integrality(self, flag: bool = True) -> "LinearConstraintSet":
        return replace(self, integrality=flag)

    def with_total(self, relation: str, value: float) -> "LinearConstraintSet":
        return replace(self, total_trials=(relation, value))


@dataclass(frozen=True)
class Violation:
    name: str
    kind: str
    amount: float


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    violations: tuple[Violation, ...]

    def __bool__(self) -> bool:
        return self.feasible

    def describe(self) -> str:
        if self.feasible:
            return "feasible"
        parts = [f"{v.name} ({v.kind}, by {v.amount:.3e})" for v in self.violations]
        return "infeasible: " + "; ".join(parts)


def check_feasible(
    constraints: LinearConstraintSet,
    design: Design | np.ndarray,
    tol: float = FEASIBILITY_TOL,
) -> FeasibilityReport:
    """Check a weight vector against a constraint set.

    All checks are absolute at tolerance ``tol`` except integrality, which
    uses EXACTNESS_TOL.  Returns a report listing every violated restriction.
    """
    w = design.weights if isinstance(design, Design) else np.asarray(design, dtype=float).reshape(-1)
    if w.shape[0] != constraints.npoints:
        raise DomainError("design and constraint set sizes differ")
    bad: list[Violation] = []
    for i in range(constraints.npoints):
        if w[i] < constraints.lower[i] - tol:
            bad.append(Violation(f"lower[{i}]", "bound", float(constraints.lower[i] - w[i])))
        if w[i] > constraints.upper[i] + tol:
            bad.append(Violation(f"upper[{i}]", "bound", float(w[i] - constraints.upper[i])))
    if constraints.total_trials is not None:
        rel, val = constraints.total_trials
        row = ConstraintRow(np.ones(constraints.npoints), rel, val, name="total_trials")
        res = row.residual(w)
        if res > tol:
            bad.append(Violation("total_trials", "total", float(res)))
    for k, row in enumerate(constraints.rows):
        res = row.residual(w)
        if res > tol:
            bad.append(Violation(row.name or f"row[{k}]", "row", float(res)))
    if constraints.integrality:
        frac = np.abs(w - np.round(w))
        worst = int(np.argmax(frac))
        if frac[worst] > EXACTNESS_TOL:
            bad.append(Violation(f"integrality[{worst}]", "integrality", float(frac[worst])))
    return FeasibilityReport(not bad, tuple(bad))


@dataclass(frozen=True, eq=False)
class CbrcProblem:
    """A compound-criterion design problem on a finite design space.

    terms: sequence of (B_j, H_j) pairs; B_j symmetric NND, H_j symmetric PD,
    all p x p for the regression dimension p.
    """

    space: DesignSpace
    regression: RegressionMap
    terms: tuple[tuple[np.ndarray, np.ndarray], ...]
    constraints: LinearConstraintSet

    def __post_init__(self):
        _require_same_space(self.space, self.regression.space, "regression map")
        if self.constraints.npoints != self.space.size:
            raise DomainError("constraint set is sized for a different design space")
        p = self.regression.p
        checked = []
        for j, (b, h) in enumerate(self.terms):
            b = linalg.as_symmetric(b, name=f"B[{j}]")
            h = linalg.as_symmetric(h, name=f"H[{j}]")
            if b.shape != (p, p) or h.shape != (p, p):
                raise DomainError(f"term {j} matrices must be {p}x{p}")
            bvals, _ = linalg.sym_eig(b)
            if bvals[-1] < -1e-10 * max(1.0, bvals[0]):
                raise DomainError(f"B[{j}] is not nonnegative definite")
            try:
                linalg.cholesky(h)
            except SingularMatrixError as exc:
                raise DomainError(f"H[{j}] is not positive definite") from exc
            checked.append((_readonly(b), _readonly(h)))
        if not checked:
            raise DomainError("criterion needs at least one term")
        object.__setattr__(self, "terms", tuple(checked))

    @property
    def num_terms(self) -> int:
        return len(self.terms)

    @property
    def p(self) -> int:
        return self.regression.p

    def with_integrality(self, flag: bool = True) -> "CbrcProblem":
        return replace(self, constraints=self.constraints.with_integrality(flag))

    def with_constraints(self, constraints: LinearConstraintSet) -> "CbrcProblem":
        return replace(self, constraints=constraints)


def information_matrix(design: Design, regression: RegressionMap) -> np.ndarray:
    """M(xi) = sum_x xi(x) f(x) f(x)^T."""
    _require_same_space(design.space, regression.space, "design")
    f = regression.matrix
    m = f.T @ (design.weights[:, None] * f)
    return 0.5 * (m + m.T)


def cbrc_term_values(problem: CbrcProblem, design: Design) -> tuple[float, ...]:
    """Per-term values tr((M+B_j)^{-1} H_j); +inf where M+B_j is singular."""
    _require_same_space(design.space, problem.space, "design")
    m = information_matrix(design, problem.regression)
    out = []
    for b, h in problem.terms:
        try:
            out.append(linalg.trace_of_inverse_product(m + b, h))
        except SingularMatrixError:
            out.append(math.inf)
    return tuple(out)


def cbrc_value(problem: CbrcProblem, design: Design) -> float:
    """Criterion value Phi(xi); +inf when any term is singular."""
    return float(sum(cbrc_term_values(problem, design)))


def apply_weights(problem: CbrcProblem, weights: Sequence[float]) -> CbrcProblem:
    """Weighted criterion sum_j w_j tr((M+B_j)^{-1} H_j) as a plain problem.

    Positive weights fold into the H_j (w_j H_j is again symmetric PD), so the
    weighted criterion needs no machinery of its own.
    """
    w = np.asarray(weights, dtype=float).reshape(-1)
    if w.shape[0] != problem.num_terms:
        raise DomainError("need one weight per criterion term")
    if np.any(w <= 0):
        raise DomainError("criterion weights must be positive")
    terms = tuple((b, wj * h) for (b, h), wj in zip(problem.terms, w))
    return replace(problem, terms=terms)
