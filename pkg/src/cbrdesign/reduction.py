"""Reduction of the compound criterion to constrained A-optimality.

The criterion sum_j tr((M(xi)+B_j)^{-1} H_j) on a space X equals a plain
A-criterion tr(Mtilde(xitilde)^{-1}) on an artificial model built as follows.

For each term j factor H_j = K_j K_j^T (lower Cholesky) and eigendecompose
K_j^{-1} B_j K_j^{-T} = sum_k u_jk u_jk^T, keeping the r_j eigenpairs above a
numerical-rank threshold.  The artificial design space carries s copies of X
plus, per term, r_j auxiliary points.  Regressors live in R^{s*p} and are
block-supported: the copy of x in block j maps to K_j^{-1} f(x) placed in
block j, the k-th auxiliary point of term j maps to u_jk in block j.

A design xitilde on the extended space is *coupled* when all s copies of X
carry identical weights and every auxiliary point has weight exactly 1.  For
coupled designs the j-th diagonal block of Mtilde equals
K_j^{-1} (M(xi) + B_j) K_j^{-T}, hence

    tr(Mtilde(xitilde)^{-1}) = Phi(xi),    xi = restriction to block 1,

including the +inf cases (Mtilde is singular iff some M+B_j is).  Linear
constraints on xi lift to the same rows on the block-1 copy.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import linalg
from .errors import DomainError, InfeasibleError, SingularMatrixError
from .model import (
    CbrcProblem,
    ConstraintRow,
    Design,
    DesignSpace,
    LinearConstraintSet,
    _readonly,
)

#: Eigenvalues of K^{-1} B K^{-T} at or below  p * eps * lambda_max  are
#: treated as zero when counting auxiliary points.
_EPS = float(np.finfo(float).eps)


@dataclass(frozen=True, eq=False)
class ArtificialProblem:
    """A-criterion problem equivalent to a compound-criterion problem.

    base: the original problem.
    extended_space: s copies of the base space followed by auxiliary points,
        grouped by term.
    f_tilde_matrix: (n_extended, s*p) artificial regressors, one row per
        extended point; block-supported as described in the module docstring.
    chol_factors: per term, the lower Cholesky factor K_j of H_j.
    aux_vectors: per term, an (r_j, p) array whose rows are the u_jk.
    copy_index: per term, the extended-point indices of that term's copy of
        the base space (length d each).
    aux_index: per term, the extended-point indices of its auxiliary points.
    """

    base: CbrcProblem
    extended_space: DesignSpace
    f_tilde_matrix: np.ndarray
    chol_factors: tuple[np.ndarray, ...]
    aux_vectors: tuple[np.ndarray, ...]
    copy_index: tuple[np.ndarray, ...]
    aux_index: tuple[np.ndarray, ...]

    @property
    def s(self) -> int:
        return self.base.num_terms

    @property
    def p(self) -> int:
        return self.base.p

    @property
    def ranks(self) -> tuple[int, ...]:
        return tuple(u.shape[0] for u in self.aux_vectors)

    @property
    def n_extended(self) -> int:
        return self.extended_space.size

    def f_tilde(self, i: int) -> np.ndarray:
        """Artificial regressor of extended point i."""
        return self.f_tilde_matrix[i]

    def block_slice(self, j: int) -> slice:
        """Coordinate slice of term j (0-based) inside R^{s*p}."""
        return slice(j * self.p, (j + 1) * self.p)

    def extended_constraints(self) -> LinearConstraintSet:
        """Constraint set on the extended space, with coupling as explicit rows.

        Contains: the base rows and total-trials restriction rewritten on the
        block-1 copy, equality rows tying every other copy of each point to
        its block-1 weight, base bounds on the block-1 copy, and fixed unit
        weights (lower = upper = 1) on every auxiliary point.

        This is the reference form; the cone formulation eliminates the
        coupling rows by substitution instead of materializing them.
        """
        d = self.base.space.size
        n_ext = self.n_extended
        base_c = self.base.constraints
        first = self.copy_index[0]

        def lift(coef: np.ndarray) -> np.ndarray:
            row = np.zeros(n_ext)
            row[first] = coef
            return row

        rows = [
            ConstraintRow(lift(r.coefficients), r.relation, r.rhs, name=r.name)
            for r in base_c.rows
        ]
        for j in range(1, self.s):
            for i in range(d):
                coef = np.zeros(n_ext)
                coef[self.copy_index[j][i]] = 1.0
                coef[first[i]] = -1.0
                rows.append(
                    ConstraintRow(
                        coef, "=", 0.0, name=f"couple[b{j + 1},{self.base.space.labels[i]}]"
                    )
                )
        total = None
        if base_c.total_trials is not None:
            rel, val = base_c.total_trials
            rows.append(ConstraintRow(lift(np.ones(d)), rel, val, name="total_trials"))
        lower = np.zeros(n_ext)
        upper = np.full(n_ext, np.inf)
        lower[first] = base_c.lower
        upper[first] = base_c.upper
        for j in range(self.s):
            lower[self.aux_index[j]] = 1.0
            upper[self.aux_index[j]] = 1.0
        return LinearConstraintSet(
            n_ext,
            rows=tuple(rows),
            total_trials=total,
            lower=lower,
            upper=upper,
            integrality=base_c.integrality,
        )


def _aux_rank_threshold(p: int, lam_max: float) -> float:
    return p * _EPS * max(lam_max, 0.0)


def build_artificial(problem: CbrcProblem) -> ArtificialProblem:
    """Construct the equivalent A-criterion model for a compound problem."""
    d = problem.space.size
    p = problem.p
    s = problem.num_terms
    base_f = problem.regression.matrix

    chol_factors: list[np.ndarray] = []
    aux_vectors: list[np.ndarray] = []
    copied_f: list[np.ndarray] = []
    for j, (b, h) in enumerate(problem.terms):
        k = linalg.cholesky(h)  # problem validation guarantees H_j is PD
        # K^{-1} f(x) for every x, and C = K^{-1} B K^{-T}
        fj = scipy.linalg.solve_triangular(k, base_f.T, lower=True, check_finite=False).T
        kb = scipy.linalg.solve_triangular(k, b, lower=True, check_finite=False)
        c = scipy.linalg.solve_triangular(k, kb.T, lower=True, check_finite=False)
        vals, vecs = linalg.sym_eig(0.5 * (c + c.T))
        lam_max = float(vals[0]) if vals.size else 0.0
        if lam_max > 0.0:
            keep = vals > _aux_rank_threshold(p, lam_max)
            u = (vecs[:, keep] * np.sqrt(vals[keep])).T
        else:
            u = np.zeros((0, p))
        chol_factors.append(_readonly(k))
        aux_vectors.append(_readonly(u))
        copied_f.append(fj)

    labels: list[str] = []
    coords: list[np.ndarray] = []
    base_dim = problem.space.coords.shape[1]
    coord_width = 1 + max(base_dim, 1)

    def pad(vals: list[float]) -> np.ndarray:
        row = np.zeros(coord_width)
        row[: len(vals)] = vals
        return row

    rows_f: list[np.ndarray] = []
    copy_index: list[np.ndarray] = []
    aux_index: list[np.ndarray] = []
    for j in range(s):
        idx = []
        for i in range(d):
            idx.append(len(labels))
            labels.append(f"b{j + 1}:{problem.space.labels[i]}")
            coords.append(pad([float(j + 1), *problem.space.coords[i]]))
            row = np.zeros(s * p)
            row[j * p : (j + 1) * p] = copied_f[j][i]
            rows_f.append(row)
        copy_index.append(np.asarray(idx, dtype=int))
    for j in range(s):
        idx = []
        for k_aux in range(aux_vectors[j].shape[0]):
            idx.append(len(labels))
            labels.append(f"b{j + 1}:aux{k_aux + 1}")
            coords.append(pad([-float(j + 1), float(k_aux + 1)]))
            row = np.zeros(s * p)
            row[j * p : (j + 1) * p] = aux_vectors[j][k_aux]
            rows_f.append(row)
        aux_index.append(np.asarray(idx, dtype=int))

    extended = DesignSpace(tuple(labels), np.vstack(coords))
    return ArtificialProblem(
        base=problem,
        extended_space=extended,
        f_tilde_matrix=_readonly(np.vstack(rows_f)),
        chol_factors=tuple(chol_factors),
        aux_vectors=tuple(aux_vectors),
        copy_index=tuple(np.asarray(ix) for ix in copy_index),
        aux_index=tuple(np.asarray(ix) for ix in aux_index),
    )


def lift_design(artificial: ArtificialProblem, design: Design) -> Design:
    """The unique coupled extended design restricting to ``design`` on block 1."""
    if not design.space.same_as(artificial.base.space):
        raise DomainError("design is not on the base design space")
    w = np.zeros(artificial.n_extended)
    for j in range(artificial.s):
        w[artificial.copy_index[j]] = design.weights
        w[artificial.aux_index[j]] = 1.0
    return Design(artificial.extended_space, w)


def recover_design(
    artificial: ArtificialProblem, extended: Design, tol: float = 1e-7
) -> Design:
    """Restrict a coupled extended design back to the base space.

    Validates coupling (all copies carry the block-1 weights) and the unit
    auxiliary weights to absolute tolerance ``tol``; raises InfeasibleError
    when violated.
    """
    if not extended.space.same_as(artificial.extended_space):
        raise DomainError("design is not on the extended design space")
    w = extended.weights
    first = w[artificial.copy_index[0]]
    for j in range(1, artificial.s):
        dev = np.max(np.abs(w[artificial.copy_index[j]] - first))
        if dev > tol:
            raise InfeasibleError(
                f"copies of the base space are not coupled (max deviation {dev:.3e})"
            )
    for j in range(artificial.s):
        if artificial.aux_index[j].size:
            dev = np.max(np.abs(w[artificial.aux_index[j]] - 1.0))
            if dev > tol:
                raise InfeasibleError(
                    f"auxiliary weights deviate from 1 by up to {dev:.3e}"
                )
    return Design(artificial.base.space, first)


def information_matrix_artificial(
    artificial: ArtificialProblem, extended: Design
) -> np.ndarray:
    """Mtilde(xitilde) = sum over extended points of weight * f_tilde f_tilde^T."""
    if not extended.space.same_as(artificial.extended_space):
        raise DomainError("design is not on the extended design space")
    f = artificial.f_tilde_matrix
    m = f.T @ (extended.weights[:, None] * f)
    return 0.5 * (m + m.T)


def a_criterion_value(artificial: ArtificialProblem, extended: Design) -> float:
    """tr(Mtilde^{-1}) of a design on the extended space; +inf when singular."""
    m = information_matrix_artificial(artificial, extended)
    try:
        return linalg.trace_of_inverse_product(m, np.eye(m.shape[0]))
    except SingularMatrixError:
        return math.inf
