"""Brute-force reference solvers, independent of the conic machinery.

These exist to cross-check the main solvers on small instances.  They
deliberately avoid the package's factorization helpers: criterion values
here come from explicit linear solves of M + B_j, and singularity is
decided by an eigenvalue test against the shared reciprocal-condition
floor (EVAL_RCOND_FLOOR), so the +inf verdicts agree with the fast path
except on matrices sitting essentially at the floor itself.  Do not use
these for real problems; cost grows combinatorially.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, TooLargeError
from .linalg import EVAL_RCOND_FLOOR
from .model import (
    CbrcProblem,
    Design,
    DesignSpace,
    LinearConstraintSet,
    check_feasible,
)

#: Refuse exhaustive enumeration beyond this many weight vectors.
ENUMERATION_CAP = 10_000_000


def direct_value(problem: CbrcProblem, weights: np.ndarray) -> float:
    """Criterion value by explicit solves; +inf on numerical singularity."""
    f = problem.regression.matrix
    m = f.T @ (np.asarray(weights, dtype=float)[:, None] * f)
    m = 0.5 * (m + m.T)
    total = 0.0
    for b, h in problem.terms:
        mb = m + b
        vals = np.linalg.eigvalsh(mb)
        if vals[0] <= EVAL_RCOND_FLOOR * max(float(vals[-1]), 0.0) or vals[0] <= 0:
            return math.inf
        total += float(np.trace(np.linalg.solve(mb, h)))
    return total


@dataclass(frozen=True, eq=False)
class EnumerationResult:
    design: Design | None
    value: float
    num_feasible: int
    num_enumerated: int


def _compositions(total: int, lo: np.ndarray, hi: np.ndarray):
    """Yield integer vectors with given sum inside [lo, hi], lexicographically."""
    d = lo.shape[0]
    vec = np.zeros(d, dtype=float)

    def rec(i: int, remaining: int):
        if i == d - 1:
            if lo[i] <= remaining <= hi[i]:
                vec[i] = remaining
                yield vec
            return
        tail_lo = int(np.sum(lo[i + 1 :]))
        tail_hi = int(np.sum(np.minimum(hi[i + 1 :], remaining)))
        start = max(int(lo[i]), remaining - tail_hi)
        stop = min(int(hi[i]), remaining - tail_lo)
        for v in range(start, stop + 1):
            vec[i] = v
            yield from rec(i + 1, remaining - v)

    yield from rec(0, total)


def enumerate_exact(problem: CbrcProblem, total: int) -> EnumerationResult:
    """Exhaustively minimize over integer designs with sum(w) == total.

    Enumeration is lexicographic over weight vectors; strictly better values
    replace the best, so ties keep the lexicographically smallest design.
    Raises TooLargeError when the unconstrained composition count exceeds
    ENUMERATION_CAP.
    """
    if total < 0:
        raise DomainError("total must be nonnegative")
    d = problem.space.size
    count = math.comb(total + d - 1, d - 1)
    if count > ENUMERATION_CAP:
        raise TooLargeError(
            f"{count} weight vectors to enumerate, cap is {ENUMERATION_CAP}"
        )
    cset = problem.constraints
    lo = np.ceil(np.array(cset.lower) - 1e-9)
    hi = np.minimum(np.floor(np.array(cset.upper) + 1e-9), float(total))
    best: np.ndarray | None = None
    best_val = math.inf
    n_feas = 0
    n_enum = 0
    for w in _compositions(total, lo, hi):
        n_enum += 1
        ok = True
        if cset.total_trials is not None:
            rel, val = cset.total_trials
            s = float(np.sum(w))
            ok = (
                (rel == "=" and abs(s - val) <= 1e-9)
                or (rel == "<=" and s <= val + 1e-9)
                or (rel == ">=" and s >= val - 1e-9)
            )
        if ok:
            for row in cset.rows:
                if row.residual(w) > 1e-9:
                    ok = False
                    break
        if not ok:
            continue
        n_feas += 1
        val = direct_value(problem, w)
        if val < best_val:
            best, best_val = w.copy(), val
    design = Design(problem.space, best) if best is not None else None
    return EnumerationResult(design, best_val, n_feas, n_enum)


def grid_search_2pt(problem: CbrcProblem, total: float, step: float) -> tuple[Design, float]:
    """Minimize over two-point designs (w0, total - w0) with w0 on a step grid.

    Only defined for two-point design spaces.  Designs violating the
    problem's constraint rows or bounds are skipped.  Batched over the grid;
    singular grid points contribute +inf.
    """
    if problem.space.size != 2:
        raise DomainError("grid search needs a two-point design space")
    if step <= 0 or total < 0:
        raise DomainError("need step > 0 and total >= 0")
    n_steps = int(math.floor(total / step + 1e-9))
    w0 = np.arange(n_steps + 1) * step
    w0 = np.minimum(w0, total)
    grid = np.column_stack([w0, total - w0])

    keep = np.ones(grid.shape[0], dtype=bool)
    cset = problem.constraints
    for i in range(grid.shape[0]):
        keep[i] = bool(check_feasible(cset, grid[i], tol=1e-9))
    if not np.any(keep):
        raise DomainError("no feasible design on the grid")
    grid = grid[keep]

    f = problem.regression.matrix
    p = problem.p
    outer = np.einsum("ij,ik->ijk", f, f)  # (2, p, p)
    m_all = np.einsum("ni,ijk->njk", grid, outer)
    values = np.zeros(grid.shape[0])
    eye = np.eye(p)
    for b, h in problem.terms:
        mb = m_all + b
        vals = np.linalg.eigvalsh(mb)
        bad = (vals[:, 0] <= EVAL_RCOND_FLOOR * np.maximum(vals[:, -1], 0.0)) | (vals[:, 0] <= 0)
        term = np.full(grid.shape[0], math.inf)
        good = ~bad
        if np.any(good):
            sol = np.linalg.solve(mb[good], np.broadcast_to(h, (int(np.sum(good)), p, p)))
            term[good] = np.trace(sol, axis1=1, axis2=2)
        values = values + term
    best = int(np.argmin(values))
    return Design(problem.space, grid[best]), float(values[best])


def random_feasible(
    space: DesignSpace,
    constraints: LinearConstraintSet,
    seed: int,
    attempts: int = 200,
) -> Design | None:
    """A feasible design found by seeded random search, or None.

    Uses numpy's RandomState (Mersenne Twister) with the given seed, so the
    result is reproducible across platforms.  Continuous candidates are drawn
    uniformly in the bound box (capped by the total when one is set) and
    rescaled onto a total-trials equality; integer problems draw multinomial
    counts instead.  Purely rejection-based beyond that: after ``attempts``
    draws without a feasible hit, returns None.
    """
    if constraints.npoints != space.size:
        raise DomainError("constraint set is sized for a different space")
    rng = np.random.RandomState(seed)
    d = space.size
    lo = np.array(constraints.lower)
    hi = np.array(constraints.upper)
    total = None
    if constraints.total_trials is not None and constraints.total_trials[0] == "=":
        total = constraints.total_trials[1]
    cap = total if total is not None else 2.0 * d
    hi_eff = np.minimum(hi, cap)

    for _ in range(attempts):
        if constraints.integrality:
            if total is None:
                w = np.floor(lo + rng.random_sample(d) * (hi_eff - lo + 1.0))
            else:
                probs = rng.random_sample(d)
                probs /= probs.sum()
                w = rng.multinomial(int(round(total)), probs).astype(float)
        else:
            w = lo + rng.random_sample(d) * np.maximum(hi_eff - lo, 0.0)
            if total is not None:
                s = float(np.sum(w))
                if s > 0:
                    w = w * (total / s)
        if check_feasible(constraints, w):
            return Design(space, w)
    return None
