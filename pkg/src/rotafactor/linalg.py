"""
Dense linear-algebra kernels used throughout the package.

Matrices are plain 2-D ``numpy.ndarray`` objects of dtype float64. Every
kernel validates its operands, never modifies them in place, and raises a
:class:`~rotafactor.errors.NumericalError` subclass instead of returning
garbage when the problem is numerically singular.
"""

from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg

from .errors import (
    ConvergenceError,
    DimensionError,
    NotPositiveDefiniteError,
    SingularMatrixError,
)

#: relative pivot size below which a matrix is treated as singular
PIVOT_TOL = 1e-12
#: max-abs asymmetry tolerated by the symmetric kernels
SYMMETRY_TOL = 1e-10


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Return ``a`` as a finite, non-empty 2-D float64 array (a copy)."""
    m = np.array(a, dtype=np.float64)
    if m.ndim == 1:
        m = m.reshape(-1, 1)
    if m.ndim != 2 or m.shape[0] == 0 or m.shape[1] == 0:
        raise DimensionError(f"{name} must be a non-empty 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains NaN or infinite entries")
    return m


def _require_square(a: np.ndarray, op: str) -> None:
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"{op} requires a square matrix, got {a.shape}")


def _require_symmetric(a: np.ndarray, op: str) -> None:
    _require_square(a, op)
    asym = np.max(np.abs(a - a.T))
    if asym > SYMMETRY_TOL:
        raise ValueError(f"{op} requires a symmetric matrix (max asymmetry {asym:.3g})")


def matmul(a, b) -> np.ndarray:
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def transpose(a) -> np.ndarray:
    return as_matrix(a).T.copy()


def hadamard(a, b) -> np.ndarray:
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape != b.shape:
        raise DimensionError(f"Hadamard product needs equal shapes, got {a.shape} and {b.shape}")
    return a * b


def kronecker(a, b) -> np.ndarray:
    return np.kron(as_matrix(a, "a"), as_matrix(b, "b"))


def inverse(a) -> np.ndarray:
    """
    Invert a square matrix by LU factorisation with partial pivoting.

    Raises
    ------
    SingularMatrixError
        If any pivot is smaller than ``PIVOT_TOL`` times the largest
        absolute entry of ``a``.
    """
    a = as_matrix(a)
    _require_square(a, "inverse")
    scale = np.max(np.abs(a))
    if scale == 0.0:
        raise SingularMatrixError("cannot invert the zero matrix")
    with warnings.catch_warnings():
        # exact zero pivots are reported below as SingularMatrixError
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if np.min(pivots) < PIVOT_TOL * scale:
        raise SingularMatrixError(
            f"matrix is numerically singular (smallest pivot {np.min(pivots):.3g})"
        )
    return scipy.linalg.lu_solve((lu, piv), np.eye(a.shape[0]), check_finite=False)


def sym_eigen(a) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and orthonormal eigenvectors of a symmetric matrix."""
    a = as_matrix(a)
    _require_symmetric(a, "sym_eigen")
    sym = (a + a.T) / 2.0
    try:
        values, vectors = np.linalg.eigh(sym)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"symmetric eigensolver did not converge: {exc}") from exc
    order = np.argsort(values, kind="stable")[::-1]
    return values[order], vectors[:, order]


def svd_thin(a) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Thin SVD ``a = u @ diag(s) @ v.T`` with ``s`` descending; note ``v``, not ``v.T``."""
    a = as_matrix(a)
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"SVD did not converge: {exc}") from exc
    return u, s, vt.T


def cholesky_lower(a) -> np.ndarray:
    """
    Lower Cholesky factor ``L`` with ``L @ L.T == a``.

    Doubles as the positive-definiteness test: any squared diagonal pivot
    at or below ``PIVOT_TOL`` raises :class:`NotPositiveDefiniteError`.
    """
    a = as_matrix(a)
    _require_symmetric(a, "cholesky_lower")
    try:
        low = np.linalg.cholesky((a + a.T) / 2.0)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError("matrix is not positive definite") from exc
    if np.min(np.diag(low)) ** 2 <= PIVOT_TOL:
        raise NotPositiveDefiniteError("matrix is not positive definite (vanishing pivot)")
    return low


def condition_number(a) -> float:
    """Ratio of the largest to the smallest absolute eigenvalue; ``inf`` if singular."""
    values, _ = sym_eigen(a)
    mags = np.abs(values)
    lo = np.min(mags)
    if lo == 0.0:
        return float("inf")
    return float(np.max(mags) / lo)
