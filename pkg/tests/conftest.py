"""Shared helpers: random problem generators and a fully independent
criterion evaluator (explicit inverses, no package linear algebra)."""
from __future__ import annotations

import math

import numpy as np
import pytest

from cbrdesign import (
    CbrcProblem,
    ConstraintRow,
    DesignSpace,
    LinearConstraintSet,
    RegressionMap,
)
from cbrdesign.linalg import EVAL_RCOND_FLOOR


def random_space(rng: np.random.RandomState, d: int) -> DesignSpace:
    coords = rng.uniform(-1.0, 1.0, size=(d, 1))
    labels = tuple(f"p{i}" for i in range(d))
    return DesignSpace(labels, coords)


def random_regression(rng: np.random.RandomState, space: DesignSpace, p: int) -> RegressionMap:
    if space.size < p:
        raise ValueError(f"{space.size} points cannot span {p} parameters")
    while True:
        f = rng.standard_normal((space.size, p))
        if np.linalg.matrix_rank(f) == p:
            return RegressionMap(space, f)


def random_nnd(rng: np.random.RandomState, p: int, rank: int) -> np.ndarray:
    """Exactly-zero matrix at rank 0, otherwise G G^T with G of that rank."""
    if rank == 0:
        return np.zeros((p, p))
    g = rng.standard_normal((p, rank))
    b = g @ g.T
    return 0.5 * (b + b.T)


def random_pd(rng: np.random.RandomState, p: int) -> np.ndarray:
    g = rng.standard_normal((p, p))
    h = g @ g.T + (0.3 + rng.uniform()) * np.eye(p)
    return 0.5 * (h + h.T)


def random_problem(
    rng: np.random.RandomState,
    d: int,
    p: int,
    s: int,
    b_ranks: list[int] | None = None,
    constraints: LinearConstraintSet | None = None,
) -> CbrcProblem:
    space = random_space(rng, d)
    reg = random_regression(rng, space, p)
    if b_ranks is None:
        b_ranks = [int(rng.randint(0, p + 1)) for _ in range(s)]
    terms = tuple((random_nnd(rng, p, r), random_pd(rng, p)) for r in b_ranks)
    if constraints is None:
        constraints = LinearConstraintSet.unconstrained(d)
    return CbrcProblem(space, reg, terms, constraints)


def explicit_phi(problem: CbrcProblem, weights: np.ndarray) -> float:
    """Criterion via numpy.linalg.inv, independent of the package's routines.

    Declares singularity at the package's shared reciprocal-condition floor
    so the +inf verdicts agree away from the floor itself.
    """
    f = np.asarray(problem.regression.matrix)
    w = np.asarray(weights, dtype=float)
    m = f.T @ (w[:, None] * f)
    total = 0.0
    for b, h in problem.terms:
        mb = m + b
        mb = 0.5 * (mb + mb.T)
        vals = np.linalg.eigvalsh(mb)
        if vals[0] <= EVAL_RCOND_FLOOR * max(vals[-1], 0.0) or vals[0] <= 0:
            return math.inf
        total += float(np.trace(np.linalg.inv(mb) @ h))
    return total


@pytest.fixture
def rng() -> np.random.RandomState:
    return np.random.RandomState(20240817)
