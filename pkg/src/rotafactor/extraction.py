"""Unweighted least squares factor extraction by iterated principal axes."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, SingularMatrixError
from .linalg import as_matrix, inverse, sym_eigen

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExtractionResult:
    """
    Unrotated factor solution.

    ``objective`` is the sum of squared off-diagonal residuals
    ``r - l_u @ l_u.T`` over the upper triangle. ``objective_trace`` holds the
    objective after every iteration. ``heywood`` is set when a communality
    had to be clamped to [0, 1]; ``smc_fallback`` when the correlation matrix
    could not be inverted for the squared-multiple-correlation start.
    """

    l_u: np.ndarray
    communalities: np.ndarray
    objective: float
    iterations: int
    converged: bool
    heywood: bool = False
    smc_fallback: bool = False
    objective_trace: tuple[float, ...] = field(default=(), repr=False)


def offdiag_objective(r: np.ndarray, l_u: np.ndarray) -> float:
    resid = r - l_u @ l_u.T
    iu = np.triu_indices(r.shape[0], k=1)
    return float(np.sum(resid[iu] ** 2))


def _initial_communalities(r: np.ndarray) -> tuple[np.ndarray, bool]:
    try:
        smc = 1.0 - 1.0 / np.diag(inverse(r))
    except SingularMatrixError:
        logger.warning("correlation matrix is singular; starting from communalities of 0.5")
        return np.full(r.shape[0], 0.5), True
    return np.clip(smc, 0.0, 1.0), False


def uls_extract(r, q: int, tol: float = 1e-6, max_iter: int = 1000) -> ExtractionResult:
    """
    Extract ``q`` unrotated factors from a correlation matrix.

    Communalities start at the squared multiple correlations. Each
    iteration places the current communalities on the diagonal, takes the
    leading ``q`` eigenpairs (negative eigenvalues floored at zero) and
    updates the communalities to the row sums of squared loadings. Stops
    when no communality changes by ``tol`` or more.

    Parameters
    ----------
    r : array-like, shape (p, p)
        Symmetric correlation matrix with unit diagonal.
    q : int
        Number of factors, ``1 <= q < p``.
    tol : float
    max_iter : int

    Returns
    -------
    ExtractionResult
        Column signs are fixed so that every loading column sums to a
        non-negative value.
    """
    r = as_matrix(r, "correlation matrix")
    p = r.shape[0]
    if r.shape != (p, p):
        raise DimensionError(f"correlation matrix must be square, got {r.shape}")
    if np.max(np.abs(r - r.T)) > 1e-10:
        raise ValueError("correlation matrix is not symmetric")
    if np.max(np.abs(np.diag(r) - 1.0)) > 1e-8:
        raise ValueError("correlation matrix must have a unit diagonal")
    if not 1 <= q < p:
        raise ValueError(f"need 1 <= q < p, got q={q}, p={p}")

    h, smc_fallback = _initial_communalities(r)
    heywood = False
    converged = False
    trace = []
    work = r.copy()
    lam = np.zeros((p, q))
    it = 0
    for it in range(1, max_iter + 1):
        np.fill_diagonal(work, h)
        values, vectors = sym_eigen(work)
        lam = vectors[:, :q] * np.sqrt(np.maximum(values[:q], 0.0))
        new_h = np.sum(lam**2, axis=1)
        if np.any(new_h > 1.0):
            heywood = True
            new_h = np.minimum(new_h, 1.0)
        trace.append(offdiag_objective(r, lam))
        change = np.max(np.abs(new_h - h))
        h = new_h
        if change < tol:
            converged = True
            break

    if heywood:
        # keep l_u @ l_u.T consistent with the clamped communalities
        norms = np.sqrt(np.sum(lam**2, axis=1))
        over = norms > 1.0
        lam[over] /= norms[over, None]
        h = np.sum(lam**2, axis=1)
    if not converged:
        logger.debug("ULS extraction stopped after %d iterations without converging", it)

    signs = np.where(lam.sum(axis=0) < 0.0, -1.0, 1.0)
    lam = lam * signs
    return ExtractionResult(
        l_u=lam,
        communalities=h,
        objective=offdiag_objective(r, lam),
        iterations=it,
        converged=converged,
        heywood=heywood,
        smc_fallback=smc_fallback,
        objective_trace=tuple(trace),
    )
