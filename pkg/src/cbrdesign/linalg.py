"""Dense symmetric linear algebra kernels.

Everything here operates on small dense symmetric matrices and goes through
factorizations; no routine forms an explicit inverse.  Singularity decisions
are made against relative thresholds tied to machine epsilon so that the
same matrix gets the same verdict everywhere in the package.
"""
from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import ConvergenceError, DomainError, SingularMatrixError

_EPS = float(np.finfo(float).eps)

#: Relative asymmetry tolerated before a matrix is rejected as non-symmetric.
SYMMETRY_RTOL = 1e-12


def as_symmetric(a, *, name: str = "matrix") -> np.ndarray:
    """Validate ``a`` as square symmetric and return a symmetrized float copy.

    Symmetry is checked relative to the largest entry magnitude (with an
    absolute floor of 1, so exact zero matrices pass).  Raises DomainError
    on shape or symmetry violations.
    """
    m = np.asarray(a, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DomainError(f"{name} must be square, got shape {m.shape}")
    if m.shape[0] < 1:
        raise DomainError(f"{name} must have dimension >= 1")
    scale = max(1.0, float(np.max(np.abs(m))) if m.size else 1.0)
    if float(np.max(np.abs(m - m.T))) > SYMMETRY_RTOL * scale:
        raise DomainError(f"{name} is not symmetric")
    return 0.5 * (m + m.T)


def pivot_threshold(m: np.ndarray) -> float:
    """Numerical-singularity threshold for a symmetric NND matrix.

    dim * eps * max(diag).  Squared Cholesky pivots at or below this value
    are treated as zero.
    """
    n = m.shape[0]
    return n * _EPS * max(float(np.max(np.diag(m))), 0.0)


def cholesky(m) -> np.ndarray:
    """Lower Cholesky factor L with L @ L.T == m.

    Raises SingularMatrixError when ``m`` is not numerically positive
    definite: either the factorization breaks down or some pivot squared
    falls at or below the pivot threshold.
    """
    a = as_symmetric(m)
    thresh = pivot_threshold(a)
    try:
        lower = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError("matrix is not positive definite") from exc
    piv2 = float(np.min(np.diag(lower))) ** 2
    if piv2 <= thresh:
        raise SingularMatrixError(
            f"matrix is numerically singular (pivot^2 {piv2:.3e} <= threshold {thresh:.3e})"
        )
    return lower


def sym_eig(m) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix.

    Returns (values, vectors) with eigenvalues sorted descending and
    eigenvectors in the matching columns.  Deterministic for a given input.
    """
    a = as_symmetric(m)
    try:
        vals, vecs = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError("symmetric eigendecomposition failed") from exc
    return np.ascontiguousarray(vals[::-1]), np.ascontiguousarray(vecs[:, ::-1])


#: Reciprocal-condition floor for criterion evaluation.  A theoretically
#: singular matrix can slip past the Cholesky pivot test with a pivot at
#: rounding-noise level (~ eps * scale) and then yield a garbage trace of
#: order 1/eps, so the criterion evaluators refuse any matrix whose
#: estimated rcond falls at or below this floor and report +inf instead.
#: The floor sits orders of magnitude above the noise level and orders of
#: magnitude below any comfortably invertible matrix, which keeps the
#: singular/finite verdict stable across the different evaluation routes.
EVAL_RCOND_FLOOR = 1e-9


def trace_of_inverse_product(m, h) -> float:
    """tr(m^{-1} h) computed via a Cholesky solve of ``m``.

    ``m`` must be numerically PD and have estimated reciprocal condition
    above EVAL_RCOND_FLOOR (SingularMatrixError otherwise); ``h`` symmetric
    of the same shape.
    """
    a = as_symmetric(m)
    b = as_symmetric(h, name="h")
    if a.shape != b.shape:
        raise DomainError(f"shape mismatch: {a.shape} vs {b.shape}")
    lower = cholesky(a)
    pivots = np.diag(lower)
    rcond = float(np.min(pivots) / np.max(pivots)) ** 2
    if rcond <= EVAL_RCOND_FLOOR:
        raise SingularMatrixError(
            f"matrix is too ill-conditioned to evaluate (rcond ~ {rcond:.1e})"
        )
    y = scipy.linalg.cho_solve((lower, True), b, check_finite=False)
    return float(np.trace(y))


def inverse_spd(m) -> np.ndarray:
    """Inverse of a symmetric positive definite matrix via Cholesky.

    Used only where the inverse itself is model *data* (e.g. turning a
    covariance into a precision matrix), never to evaluate criteria.
    """
    a = as_symmetric(m)
    lower = cholesky(a)
    inv = scipy.linalg.cho_solve((lower, True), np.eye(a.shape[0]), check_finite=False)
    return 0.5 * (inv + inv.T)
