"""Exact (integer-weight) designs by branch and bound over the cone relaxation.

Nodes are integer boxes [lo, hi] on the weight vector.  Each node's bound is
the dual objective of the continuous relaxation restricted to its box (minus
a small safety slack covering interior-point residuals), which lower-bounds
the criterion of every integer design inside the box.  Search is best-bound-
first with depth-first plunging until a first incumbent exists; branching is
on the most fractional weight (ties to the lowest index), floor/ceil children.

The incumbent starts from a feasibility-preserving rounding of the root
relaxation when one exists.  Equal-objective incumbents keep the first one
found and are counted as ties.  Everything is deterministic: node order is a
(bound, insertion counter) heap and the cone solver itself is deterministic.
"""
from __future__ import annotations

import heapq
import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InfeasibleError
from .model import (
    CbrcProblem,
    Design,
    LinearConstraintSet,
    cbrc_value,
    check_feasible,
)
from .reduction import build_artificial
from .socp import build_a_opt_socp, solve

log = logging.getLogger(__name__)

#: Weights within this distance of an integer count as integral.
INTEGRALITY_TOL = 1e-6

#: Default relative optimality gap for terminating the search.
DEFAULT_GAP_TOL = 1e-6

#: Default cap on processed nodes.
DEFAULT_NODE_LIMIT = 100_000

#: Interior-point tolerance used for node relaxations.
NODE_SOCP_TOL = 1e-9

#: Incumbents within this relative distance count as ties (first one kept).
_TIE_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class BnbResult:
    """Outcome of an exact-design search.

    status: optimal | gap-limit | node-limit | infeasible.
    incumbent / incumbent_value: best integer design found (None when none).
    best_bound: certified lower bound on the optimal criterion value.
    gap: (incumbent_value - best_bound) / max(1, |incumbent_value|).
    nodes: nodes processed (relaxations solved or boxes closed exactly).
    ties: integer designs found whose value matched the incumbent's.
    root_relaxation: continuous relaxation value at the root (inf when
    infeasible, nan when the root relaxation failed numerically).
    failed_nodes: node relaxations that ended in numerical failure and were
    handled by the fallback branching path.
    """

    status: str
    incumbent: Design | None
    incumbent_value: float
    best_bound: float
    gap: float
    nodes: int
    ties: int
    root_relaxation: float
    failed_nodes: int


def round_incumbent(
    problem: CbrcProblem,
    relaxed: Design,
    constraints: LinearConstraintSet | None = None,
) -> Design | None:
    """Round a relaxed design to a feasible integer design, or None.

    Candidates tried, in order: floor with the remaining total distributed to
    the largest fractional parts (when a total-trials restriction fixes the
    sum), then plain nearest-integer rounding.  Every candidate is clipped
    into the bound box and checked against the full constraint set; among the
    feasible ones the smallest criterion value wins, first-found on ties.
    """
    cset = constraints if constraints is not None else problem.constraints
    w = relaxed.weights
    lo = np.ceil(cset.lower - 1e-9)
    hi = np.floor(cset.upper + 1e-9)
    if np.any(lo > hi):
        return None

    candidates: list[np.ndarray] = []
    if cset.total_trials is not None and cset.total_trials[0] == "=":
        target = cset.total_trials[1]
        if abs(target - round(target)) > 1e-9:
            return None  # no integer design can meet a fractional total
        target = int(round(target))
        z = np.floor(w + 1e-9)
        z = np.clip(z, lo, hi)
        frac = w - np.floor(w + 1e-9)
        deficit = target - int(np.sum(z))
        order = np.argsort(-frac, kind="stable")
        for i in order:
            if deficit <= 0:
                break
            room = hi[i] - z[i]
            add = min(deficit, int(room) if math.isfinite(room) else deficit)
            z[i] += add
            deficit -= add
        order_up = np.argsort(frac, kind="stable")
        for i in order_up:
            if deficit >= 0:
                break
            room = z[i] - lo[i]
            sub = min(-deficit, int(room))
            z[i] -= sub
            deficit += sub
        if deficit == 0:
            candidates.append(z)
    candidates.append(np.clip(np.round(w), lo, hi))

    best: np.ndarray | None = None
    best_val = math.inf
    cset_int = cset.with_integrality(True)
    for z in candidates:
        if not check_feasible(cset_int, z):
            continue
        val = cbrc_value(problem, Design(problem.space, z))
        if val < best_val:
            best, best_val = z, val
    if best is None:
        return None
    return Design(problem.space, best)


def _certify_bounded(cset: LinearConstraintSet) -> None:
    if cset.total_trials is not None and cset.total_trials[0] in ("=", "<="):
        return
    if np.all(np.isfinite(cset.upper)):
        return
    raise DomainError(
        "exact search needs a bounded weight region "
        "(a total-trials cap or finite upper bounds)"
    )


@dataclass(eq=False)
class _Node:
    lower: np.ndarray
    upper: np.ndarray
    bound: float  # inherited from the parent until this node is solved
    depth: int


def solve_exact(
    problem: CbrcProblem,
    gap_tol: float = DEFAULT_GAP_TOL,
    node_limit: int = DEFAULT_NODE_LIMIT,
    socp_tol: float = NODE_SOCP_TOL,
    log_interval: int = 0,
) -> BnbResult:
    """Optimal exact design by branch and bound.

    Requires problem.constraints.integrality and a certifiably bounded
    weight region.  Terminates when the incumbent is within gap_tol
    (relative, floored at 1 absolute scale) of the best bound, or at
    node_limit processed nodes.
    """
    cset = problem.constraints
    if not cset.integrality:
        raise DomainError("solve_exact needs constraints with integrality set")
    _certify_bounded(cset)

    artificial = build_artificial(problem)
    root_lo = np.ceil(cset.lower - 1e-9)
    root_hi = np.floor(cset.upper + 1e-9)

    incumbent: np.ndarray | None = None
    inc_val = math.inf
    ties = 0
    nodes = 0
    failed = 0
    min_open_bound = math.inf  # over nodes pruned by the gap rule
    root_relaxation = math.nan
    counter = itertools.count()

    heap: list[tuple[float, int, _Node]] = []
    dive: list[_Node] = []

    def cut() -> float:
        if incumbent is None:
            return math.inf
        return inc_val - gap_tol * max(1.0, abs(inc_val))

    def offer(w: np.ndarray, value: float) -> None:
        nonlocal incumbent, inc_val, ties
        if not math.isfinite(value):
            return
        if incumbent is None:
            incumbent, inc_val = w.copy(), value
            return
        tie_band = _TIE_RTOL * max(1.0, abs(inc_val))
        if value < inc_val - tie_band:
            incumbent, inc_val = w.copy(), value
        elif abs(value - inc_val) <= tie_band:
            ties += 1

    def push(node: _Node) -> None:
        if incumbent is None:
            dive.append(node)
        else:
            heapq.heappush(heap, (node.bound, next(counter), node))

    def flush_dive() -> None:
        while dive:
            n = dive.pop()
            heapq.heappush(heap, (n.bound, next(counter), n))

    def branch(node: _Node, index: int, split: float) -> None:
        down = _Node(node.lower.copy(), node.upper.copy(), node.bound, node.depth + 1)
        down.upper[index] = math.floor(split)
        up = _Node(node.lower.copy(), node.upper.copy(), node.bound, node.depth + 1)
        up.lower[index] = math.floor(split) + 1.0
        # the down child goes on top of the dive stack
        push(up)
        push(down)

    def branch_widest(node: _Node) -> None:
        """Fallback split when there is no fractional point to branch on."""
        ranges = node.upper - node.lower
        index = int(np.argmax(ranges))
        width = ranges[index]
        split = (
            (node.lower[index] + node.upper[index]) / 2.0
            if math.isfinite(width)
            else node.lower[index] + 1.0
        )
        branch(node, index, split)

    if np.any(root_lo > root_hi):
        return BnbResult("infeasible", None, math.inf, math.inf, 0.0, 0, 0, math.inf, 0)
    push(_Node(root_lo, root_hi, -math.inf, 0))

    status = None
    while heap or dive:
        if nodes >= node_limit:
            status = "node-limit"
            break
        if incumbent is None and dive:
            node = dive.pop()
        else:
            flush_dive()
            _, _, node = heapq.heappop(heap)
        if node.bound >= cut():
            min_open_bound = min(min_open_bound, node.bound)
            continue
        nodes += 1
        if log_interval and nodes % log_interval == 0:
            log.info(
                "node %d: incumbent %s, open %d, bound %.9g",
                nodes,
                f"{inc_val:.9g}" if incumbent is not None else "none",
                len(heap) + len(dive),
                node.bound,
            )

        if np.all(node.lower == node.upper):
            w = node.lower
            if check_feasible(cset, w):
                offer(w, cbrc_value(problem, Design(problem.space, w)))
                flush_dive()
            continue

        try:
            program = build_a_opt_socp(artificial, lower=node.lower, upper=node.upper)
        except InfeasibleError:
            continue
        sol = solve(program, tol=socp_tol)

        if sol.status == "infeasible":
            if node.depth == 0:
                root_relaxation = math.inf
            continue
        if sol.status != "optimal":
            failed += 1
            if node.depth == 0:
                root_relaxation = math.nan
            branch_widest(node)
            continue

        bound = sol.dual_objective - 10.0 * socp_tol * max(1.0, abs(sol.dual_objective))
        node.bound = bound
        if node.depth == 0:
            root_relaxation = sol.objective
        if bound >= cut():
            min_open_bound = min(min_open_bound, bound)
            continue

        w = sol.weights
        frac = np.abs(w - np.round(w))
        if float(np.max(frac)) <= INTEGRALITY_TOL:
            z = np.clip(np.round(w), node.lower, node.upper)
            if check_feasible(cset, z):
                offer(z, cbrc_value(problem, Design(problem.space, z)))
                flush_dive()
                continue
            # numerically integral but infeasible after rounding: fall back
            # to shrinking the box instead of trusting the rounding
            branch_widest(node)
            continue

        if node.depth == 0:
            seed = round_incumbent(problem, Design(problem.space, w), cset)
            if seed is not None:
                offer(seed.weights, cbrc_value(problem, seed))
                flush_dive()

        index = int(np.argmax(frac))
        branch(node, index, float(w[index]))

    if status is None:
        status = "done"

    if incumbent is None:
        if status == "node-limit":
            open_bounds = [n.bound for _, _, n in heap] + [n.bound for n in dive]
            bb = min([min_open_bound] + open_bounds)
            return BnbResult("node-limit", None, math.inf, bb, math.nan, nodes, 0, root_relaxation, failed)
        return BnbResult("infeasible", None, math.inf, math.inf, 0.0, nodes, 0, root_relaxation, failed)

    open_bounds = [n.bound for _, _, n in heap] + [n.bound for n in dive]
    best_bound = min([inc_val, min_open_bound] + open_bounds)
    gap = (inc_val - best_bound) / max(1.0, abs(inc_val))
    if status == "done":
        status = "optimal" if gap <= gap_tol + 1e-15 else "gap-limit"
    design = Design(problem.space, incumbent)
    return BnbResult(status, design, inc_val, best_bound, gap, nodes, ties, root_relaxation, failed)
