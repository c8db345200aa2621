"""Second-order cone formulation of the constrained A-criterion problem.

The A-criterion tr(Mtilde(w)^{-1}) with Mtilde(w) = sum_q w_q g_q g_q^T is
the optimal value of

    min  sum_{q,k} t_{q,k}
    s.t. sum_q h_{q,k} g_q = e_k                       for every coordinate k,
         h_{q,k}^2 <= t_{q,k} * w_q                    (rotated cones),
         w in the design constraint set,

which is jointly convex in (w, t, h).  At the optimum in (t, h) for fixed w,
sum t equals tr(Mtilde(w)^{-1}) whenever Mtilde(w) is nonsingular.

Structure exploited by the builder:

* the artificial regressors are block-supported, so for coordinate k of
  block j only the extended points of block j can contribute; h variables
  across blocks are identically zero at any optimum and are never created;
* the s copies of a base point share one weight variable (coupling by
  substitution rather than explicit equality rows);
* auxiliary points and base points with lower == upper have fixed weights,
  substituted as constants (a fixed zero weight removes its cones and h,t
  variables outright);
* base points with a zero regressor get no cones; their weight keeps its
  bound rows so it remains a plain linear variable.

The cone solve itself is delegated to Clarabel (interior point, sparse,
deterministic); `solve` maps its statuses onto {optimal, infeasible,
unbounded, numerical-failure} and retries once at a relaxed tolerance on
numerical trouble before giving up.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse

import clarabel

from .errors import DomainError, InfeasibleError
from .model import CbrcProblem, Design, cbrc_value
from .reduction import ArtificialProblem, build_artificial, lift_design

log = logging.getLogger(__name__)

#: Default interior-point tolerance (duality gap and feasibility residuals).
DEFAULT_TOL = 1e-8

#: Bounds closer than this are treated as fixing the weight.
_FIX_TOL = 1e-12


@dataclass(frozen=True)
class RotatedCone:
    """h^2 <= t * w with w either a variable column or a fixed constant."""

    t_col: int
    h_col: int
    w_col: int | None
    w_const: float
    point: int  # extended-point index
    coord: int  # artificial coordinate (0-based, within R^{s*p})


@dataclass(frozen=True, eq=False)
class ConicProgram:
    """A-criterion SOCP over variables [w_free | t | h].

    eq_coeffs / eq_rhs: equality rows (regressor-matching plus '=' design
    rows).  ineq_coeffs / ineq_rhs: rows a.x <= b (design rows and bounds).
    cones: rotated-cone triples tying h, t and a weight.
    free_points: base-point indices whose weight is a variable, in column
    order.  fixed_weights: full-length base weight vector holding the
    substituted constants, NaN at free points.
    """

    artificial: ArtificialProblem
    num_vars: int
    objective: np.ndarray
    eq_coeffs: scipy.sparse.csr_matrix
    eq_rhs: np.ndarray
    eq_names: tuple[str, ...]
    ineq_coeffs: scipy.sparse.csr_matrix
    ineq_rhs: np.ndarray
    ineq_names: tuple[str, ...]
    cones: tuple[RotatedCone, ...]
    free_points: np.ndarray
    fixed_weights: np.ndarray
    var_names: tuple[str, ...]

    @property
    def num_free(self) -> int:
        return int(self.free_points.shape[0])

    def full_weights(self, x: np.ndarray) -> np.ndarray:
        """Base weight vector from a conic variable vector."""
        w = self.fixed_weights.copy()
        w[self.free_points] = x[: self.num_free]
        return w

    def validate(self) -> None:
        """Check the structural invariants; raises DomainError on violation."""
        nf = self.num_free
        nc = len(self.cones)
        if self.num_vars != nf + 2 * nc:
            raise DomainError("variable count does not match layout [w|t|h]")
        if np.any(self.objective < 0):
            raise DomainError("objective coefficients must be nonnegative")
        t_seen = np.zeros(self.num_vars, dtype=int)
        h_seen = np.zeros(self.num_vars, dtype=int)
        w_in_cone = np.zeros(nf, dtype=bool)
        for cone in self.cones:
            t_seen[cone.t_col] += 1
            h_seen[cone.h_col] += 1
            if cone.w_col is not None:
                if not (0 <= cone.w_col < nf):
                    raise DomainError("cone weight column out of range")
                w_in_cone[cone.w_col] = True
            elif cone.w_const < 0:
                raise DomainError("fixed cone weight must be nonnegative")
        for col in range(nf, nf + nc):
            if t_seen[col] != 1:
                raise DomainError(f"t column {col} is in {t_seen[col]} cones, expected 1")
        for col in range(nf + nc, self.num_vars):
            if h_seen[col] != 1:
                raise DomainError(f"h column {col} is in {h_seen[col]} cones, expected 1")
        # every free weight is either inside some cone or pinned by bound rows
        bounded = np.zeros(nf, dtype=bool)
        ineq = self.ineq_coeffs.tocsc()
        for col in range(nf):
            if ineq.indptr[col] < ineq.indptr[col + 1]:
                bounded[col] = True
        loose = ~(w_in_cone | bounded)
        if np.any(loose):
            raise DomainError(f"weight columns {np.nonzero(loose)[0]} are unconstrained")

    def dump(self) -> str:
        """Plain-text rendering of the program, one line per row/cone.

        Line format (stable across runs for a fixed problem):
            var <col> <name>
            min <c>*<name> [+ ...]
            eq <name>: <c>*<name> [+ ...] = <rhs>
            le <name>: <c>*<name> [+ ...] <= <rhs>
            cone <i>: <h>^2 <= <t> * (<w> | const)
        Coefficients print with repr-level precision.
        """
        out = [
            f"conic-program vars={self.num_vars} eq={len(self.eq_rhs)} "
            f"ineq={len(self.ineq_rhs)} cones={len(self.cones)}"
        ]
        for i, name in enumerate(self.var_names):
            out.append(f"var {i} {name}")
        obj_terms = [
            f"{self.objective[i]:g}*{self.var_names[i]}"
            for i in np.nonzero(self.objective)[0]
        ]
        out.append("min " + " + ".join(obj_terms))

        def rows(mat, rhs, names, op):
            m = mat.tocsr()
            for r in range(m.shape[0]):
                lo, hi = m.indptr[r], m.indptr[r + 1]
                terms = " + ".join(
                    f"{m.data[k]!r}*{self.var_names[m.indices[k]]}"
                    for k in range(lo, hi)
                )
                out.append(f"{op} {names[r]}: {terms or '0'} {op_sym} {rhs[r]!r}")

        op_sym = "="
        rows(self.eq_coeffs, self.eq_rhs, self.eq_names, "eq")
        op_sym = "<="
        rows(self.ineq_coeffs, self.ineq_rhs, self.ineq_names, "le")
        for i, cone in enumerate(self.cones):
            if cone.w_col is None:
                wtxt = f"{cone.w_const!r}"
            else:
                wtxt = self.var_names[cone.w_col]
            out.append(
                f"cone {i}: {self.var_names[cone.h_col]}^2 <= "
                f"{self.var_names[cone.t_col]} * {wtxt}"
            )
        return "\n".join(out) + "\n"


def build_a_opt_socp(
    artificial: ArtificialProblem,
    lower: np.ndarray | None = None,
    upper: np.ndarray | None = None,
) -> ConicProgram:
    """Build the SOCP for an artificial problem.

    ``lower`` / ``upper`` tighten the base constraint set's bounds (used by
    branch and bound); they never relax them.  Raises InfeasibleError when
    the combined box is empty or a design row becomes unsatisfiable after
    constant substitution.
    """
    base = artificial.base
    d = base.space.size
    cset = base.constraints
    lo = np.array(cset.lower)
    hi = np.array(cset.upper)
    if lower is not None:
        lo = np.maximum(lo, np.asarray(lower, dtype=float))
    if upper is not None:
        hi = np.minimum(hi, np.asarray(upper, dtype=float))
    if np.any(lo > hi + 1e-9):
        raise InfeasibleError("empty weight box")

    fixed = np.isclose(lo, hi, rtol=0.0, atol=_FIX_TOL)
    fixed_weights = np.where(fixed, lo, np.nan)
    free_points = np.nonzero(~fixed)[0]
    col_of_point = {int(i): c for c, i in enumerate(free_points)}
    nf = free_points.shape[0]

    zero_reg = np.all(base.regression.matrix == 0.0, axis=1)

    var_names = [f"w[{base.space.labels[i]}]" for i in free_points]
    ext_labels = artificial.extended_space.labels
    p = artificial.p

    cones_meta: list[tuple[int, int, int | None, float]] = []  # ext point, coord, w_col, w_const
    for j in range(artificial.s):
        for k_local in range(p):
            coord = j * p + k_local
            for i in range(d):
                if zero_reg[i]:
                    continue
                if fixed[i] and fixed_weights[i] == 0.0:
                    continue
                w_col = col_of_point.get(int(i))
                w_const = 0.0 if w_col is not None else float(fixed_weights[i])
                cones_meta.append((int(artificial.copy_index[j][i]), coord, w_col, w_const))
            for a in artificial.aux_index[j]:
                cones_meta.append((int(a), coord, None, 1.0))

    nc = len(cones_meta)
    t_names = []
    h_names = []
    cones = []
    for idx, (ext_i, coord, w_col, w_const) in enumerate(cones_meta):
        t_col = nf + idx
        h_col = nf + nc + idx
        t_names.append(f"t[{ext_labels[ext_i]},k{coord + 1}]")
        h_names.append(f"h[{ext_labels[ext_i]},k{coord + 1}]")
        cones.append(RotatedCone(t_col, h_col, w_col, w_const, ext_i, coord))
    var_names = tuple(var_names + t_names + h_names)
    num_vars = nf + 2 * nc

    objective = np.zeros(num_vars)
    objective[nf : nf + nc] = 1.0

    # regressor-matching equalities: for block j, coordinate k, the h-weighted
    # sum of block-j regressors must be the k-th unit vector of that block
    eq_r: list[int] = []
    eq_c: list[int] = []
    eq_v: list[float] = []
    eq_rhs: list[float] = []
    eq_names: list[str] = []
    row = 0
    cones_by_coord: dict[int, list[int]] = {}
    for idx, cone in enumerate(cones):
        cones_by_coord.setdefault(cone.coord, []).append(idx)
    for j in range(artificial.s):
        blk = artificial.block_slice(j)
        for k_local in range(p):
            coord = j * p + k_local
            members = cones_by_coord.get(coord, [])
            for r in range(p):
                for idx in members:
                    g = artificial.f_tilde_matrix[cones[idx].point, blk]
                    if g[r] != 0.0:
                        eq_r.append(row)
                        eq_c.append(cones[idx].h_col)
                        eq_v.append(float(g[r]))
                eq_rhs.append(1.0 if r == k_local else 0.0)
                eq_names.append(f"match[b{j + 1},k{k_local + 1},r{r + 1}]")
                row += 1

    ineq_r: list[int] = []
    ineq_c: list[int] = []
    ineq_v: list[float] = []
    ineq_rhs: list[float] = []
    ineq_names: list[str] = []

    def add_linear(coef: np.ndarray, relation: str, rhs: float, name: str) -> None:
        """Append one design row, substituting fixed weights."""
        nonlocal row
        fixed_part = float(np.sum(coef[fixed] * lo[fixed])) if np.any(fixed) else 0.0
        rhs_adj = rhs - fixed_part
        cols = [col_of_point[int(i)] for i in free_points if coef[i] != 0.0]
        vals = [float(coef[i]) for i in free_points if coef[i] != 0.0]
        if not cols:
            ok = abs(rhs_adj) <= 1e-9 if relation == "=" else rhs_adj >= -1e-9
            if not ok:
                raise InfeasibleError(f"design row {name} unsatisfiable after fixing")
            return
        if relation == "=":
            for c, v in zip(cols, vals):
                eq_r.append(row)
                eq_c.append(c)
                eq_v.append(v)
            eq_rhs.append(rhs_adj)
            eq_names.append(name)
            row += 1
        else:
            sgn = 1.0 if relation == "<=" else -1.0
            r_ix = len(ineq_rhs)
            for c, v in zip(cols, vals):
                ineq_r.append(r_ix)
                ineq_c.append(c)
                ineq_v.append(sgn * v)
            ineq_rhs.append(sgn * rhs_adj)
            ineq_names.append(name)

    if cset.total_trials is not None:
        rel, val = cset.total_trials
        add_linear(np.ones(d), rel, val, "total_trials")
    for k, crow in enumerate(cset.rows):
        add_linear(np.array(crow.coefficients), crow.relation, crow.rhs, crow.name or f"row[{k}]")

    # bound rows for free weights; w >= 0 is implied by cone membership and
    # only stated explicitly for points outside every cone
    in_cone = np.zeros(nf, dtype=bool)
    for cone in cones:
        if cone.w_col is not None:
            in_cone[cone.w_col] = True
    for c, i in enumerate(free_points):
        label = base.space.labels[i]
        if lo[i] > 0.0:
            r_ix = len(ineq_rhs)
            ineq_r.append(r_ix)
            ineq_c.append(c)
            ineq_v.append(-1.0)
            ineq_rhs.append(-float(lo[i]))
            ineq_names.append(f"lb[{label}]")
        elif not in_cone[c]:
            r_ix = len(ineq_rhs)
            ineq_r.append(r_ix)
            ineq_c.append(c)
            ineq_v.append(-1.0)
            ineq_rhs.append(0.0)
            ineq_names.append(f"lb[{label}]")
        if math.isfinite(hi[i]):
            r_ix = len(ineq_rhs)
            ineq_r.append(r_ix)
            ineq_c.append(c)
            ineq_v.append(1.0)
            ineq_rhs.append(float(hi[i]))
            ineq_names.append(f"ub[{label}]")

    eq_mat = scipy.sparse.csr_matrix(
        (eq_v, (eq_r, eq_c)), shape=(len(eq_rhs), num_vars)
    )
    ineq_mat = scipy.sparse.csr_matrix(
        (ineq_v, (ineq_r, ineq_c)), shape=(len(ineq_rhs), num_vars)
    )
    return ConicProgram(
        artificial=artificial,
        num_vars=num_vars,
        objective=objective,
        eq_coeffs=eq_mat,
        eq_rhs=np.asarray(eq_rhs),
        eq_names=tuple(eq_names),
        ineq_coeffs=ineq_mat,
        ineq_rhs=np.asarray(ineq_rhs),
        ineq_names=tuple(ineq_names),
        cones=tuple(cones),
        free_points=free_points,
        fixed_weights=fixed_weights,
        var_names=var_names,
    )


@dataclass(frozen=True)
class ConicSolution:
    """Outcome of one conic solve.

    status: optimal | infeasible | unbounded | numerical-failure.
    objective / dual_objective: primal and dual values (sum of t at optimum
    equals the A-criterion of the optimal weights).
    gap: |primal - dual| / max(1, |primal|), certified by the solver.
    weights: full base weight vector at the optimum, None otherwise.
    attempts: (tolerance, raw solver status) per attempt, for diagnostics.
    """

    status: str
    objective: float
    dual_objective: float
    gap: float
    weights: np.ndarray | None
    x: np.ndarray | None
    iterations: int
    solve_time: float
    solver_status: str
    attempts: tuple[tuple[float, str], ...]


def _to_clarabel(program: ConicProgram):
    nf = program.num_free
    nc = len(program.cones)
    n = program.num_vars
    neq = program.eq_rhs.shape[0]
    nineq = program.ineq_rhs.shape[0]

    soc_r: list[int] = []
    soc_c: list[int] = []
    soc_v: list[float] = []
    soc_b = np.zeros(3 * nc)
    for idx, cone in enumerate(program.cones):
        r0 = 3 * idx
        # s0 = t + w >= ||(t - w, 2h)||
        soc_r.append(r0)
        soc_c.append(cone.t_col)
        soc_v.append(-1.0)
        soc_r.append(r0 + 1)
        soc_c.append(cone.t_col)
        soc_v.append(-1.0)
        if cone.w_col is None:
            soc_b[r0] = cone.w_const
            soc_b[r0 + 1] = -cone.w_const
        else:
            soc_r.append(r0)
            soc_c.append(cone.w_col)
            soc_v.append(-1.0)
            soc_r.append(r0 + 1)
            soc_c.append(cone.w_col)
            soc_v.append(1.0)
        soc_r.append(r0 + 2)
        soc_c.append(cone.h_col)
        soc_v.append(-2.0)
    soc_mat = scipy.sparse.csr_matrix((soc_v, (soc_r, soc_c)), shape=(3 * nc, n))

    a_full = scipy.sparse.vstack(
        [program.eq_coeffs, program.ineq_coeffs, soc_mat], format="csc"
    )
    b_full = np.concatenate([program.eq_rhs, program.ineq_rhs, soc_b])
    cones = []
    if neq:
        cones.append(clarabel.ZeroConeT(neq))
    if nineq:
        cones.append(clarabel.NonnegativeConeT(nineq))
    cones.extend(clarabel.SecondOrderConeT(3) for _ in range(nc))
    p_mat = scipy.sparse.csc_matrix((n, n))
    return p_mat, program.objective, a_full, b_full, cones


def solve(program: ConicProgram, tol: float = DEFAULT_TOL) -> ConicSolution:
    """Solve a ConicProgram with Clarabel.

    Deterministic for a fixed program and tolerance.  On numerical trouble
    the solve is retried once at 100x the tolerance; a solution is reported
    optimal only when its certified relative gap is within the *requested*
    tolerance.
    """
    p_mat, q, a_mat, b_vec, cone_list = _to_clarabel(program)
    attempts: list[tuple[float, str]] = []
    last = None
    for attempt_tol in (tol, tol * 100.0):
        settings = clarabel.DefaultSettings()
        settings.verbose = False
        settings.tol_gap_abs = attempt_tol
        settings.tol_gap_rel = attempt_tol
        settings.tol_feas = attempt_tol
        solver = clarabel.DefaultSolver(p_mat, q, a_mat, b_vec, cone_list, settings)
        t0 = time.perf_counter()
        sol = solver.solve()
        elapsed = time.perf_counter() - t0
        raw = str(sol.status)
        attempts.append((attempt_tol, raw))
        last = (sol, elapsed, raw)

        if raw in ("PrimalInfeasible",):
            return ConicSolution(
                status="infeasible",
                objective=math.inf,
                dual_objective=math.inf,
                gap=0.0,
                weights=None,
                x=None,
                iterations=int(sol.iterations),
                solve_time=elapsed,
                solver_status=raw,
                attempts=tuple(attempts),
            )
        if raw in ("DualInfeasible",):
            return ConicSolution(
                status="unbounded",
                objective=-math.inf,
                dual_objective=-math.inf,
                gap=0.0,
                weights=None,
                x=None,
                iterations=int(sol.iterations),
                solve_time=elapsed,
                solver_status=raw,
                attempts=tuple(attempts),
            )
        if raw in ("Solved", "AlmostSolved"):
            x = np.asarray(sol.x)
            obj = float(sol.obj_val)
            dual = float(sol.obj_val_dual)
            gap = abs(obj - dual) / max(1.0, abs(obj))
            # accept the solver's own certificate only at the requested
            # tolerance; a retry at the relaxed one must meet the gap itself
            if gap <= tol or (raw == "Solved" and attempt_tol == tol):
                return ConicSolution(
                    status="optimal",
                    objective=obj,
                    dual_objective=dual,
                    gap=gap,
                    weights=program.full_weights(x),
                    x=x,
                    iterations=int(sol.iterations),
                    solve_time=elapsed,
                    solver_status=raw,
                    attempts=tuple(attempts),
                )
        log.debug("conic solve attempt at tol=%g ended with %s, retrying", attempt_tol, raw)

    sol, elapsed, raw = last
    return ConicSolution(
        status="numerical-failure",
        objective=math.nan,
        dual_objective=math.nan,
        gap=math.nan,
        weights=None,
        x=None,
        iterations=int(sol.iterations),
        solve_time=elapsed,
        solver_status=raw,
        attempts=tuple(attempts),
    )


@dataclass(frozen=True, eq=False)
class ApproximateResult:
    """Approximate-design solve outcome.

    design / value are None / nan unless status is optimal; value is the
    criterion recomputed directly on the recovered design (not the conic
    objective), so it is meaningful on its own.
    """

    status: str
    design: Design | None
    value: float
    solution: ConicSolution | None
    artificial: ArtificialProblem


def solve_approximate(problem: CbrcProblem, tol: float = DEFAULT_TOL) -> ApproximateResult:
    """Optimal approximate design for a compound-criterion problem."""
    artificial = build_artificial(problem)
    try:
        program = build_a_opt_socp(artificial)
    except InfeasibleError:
        return ApproximateResult("infeasible", None, math.inf, None, artificial)
    solution = solve(program, tol=tol)
    if solution.status != "optimal":
        value = math.inf if solution.status == "infeasible" else math.nan
        return ApproximateResult(solution.status, None, value, solution, artificial)
    design = Design(problem.space, solution.weights)
    return ApproximateResult("optimal", design, cbrc_value(problem, design), solution, artificial)
