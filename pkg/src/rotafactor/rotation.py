"""
Oblique target rotations towards an independent clusters target.

Two methods are provided:

* :func:`omt_rotate` -- oblique mean-target rotation. The loadings are first
  rotated orthogonally towards the target, then the salient-weighted mean
  loadings of every block are rotated obliquely towards the identity, and
  the resulting transformation is applied to the full loading matrix.
* :func:`ot_rotate` -- conventional oblique target rotation of all single
  loadings (Hurley & Cattell's Procrustes method).

Both return a :class:`RotationSolution` holding the factor pattern, the
factor correlations and the Tucker congruence of the pattern with the
target.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, SingularMatrixError
from .linalg import as_matrix, condition_number, inverse, kronecker, svd_thin

#: relative singular value below which the orthogonal step is rejected
RANK_TOL = 1e-10


@dataclass(frozen=True)
class TargetSpec:
    """Binary p x q target; 1 marks a salient loading."""

    matrix: np.ndarray

    def __post_init__(self):
        m = as_matrix(self.matrix, "target")
        if not np.all((m == 0.0) | (m == 1.0)):
            raise ValueError("target entries must be 0 or 1")
        empty = np.flatnonzero(m.sum(axis=0) == 0)
        if empty.size:
            raise ValueError(f"target column(s) {', '.join(str(j + 1) for j in empty)} have no salient entry")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    @property
    def is_icm(self) -> bool:
        return bool(np.all(self.matrix.sum(axis=1) <= 1))


@dataclass(frozen=True)
class RotationOptions:
    kappa_max: float = 20.0
    ridge_step: float = 0.01
    max_ridge_iters: int = 100

    def __post_init__(self):
        if not self.kappa_max > 1:
            raise ValueError("kappa_max must exceed 1")
        if not self.ridge_step > 0:
            raise ValueError("ridge_step must be positive")
        if int(self.max_ridge_iters) != self.max_ridge_iters or self.max_ridge_iters < 1:
            raise ValueError("max_ridge_iters must be a positive integer")


@dataclass(frozen=True)
class RotationSolution:
    """
    Result of an oblique target rotation.

    Attributes
    ----------
    pattern : ndarray, shape (p, q)
        Rotated factor pattern.
    phi : ndarray, shape (q, q)
        Factor inter-correlations.
    congruence : float
        Mean Tucker congruence of the pattern columns with the target.
    per_factor_congruence : ndarray, shape (q,)
    kappa : float
        Condition number of the cross-product of the block mean loadings
        before any ridge was added (always 1.0 for OT).
    ridge_applied : float
        Total ridge constant of the retained OMT candidate (0.0 for OT).
    transform : ndarray, shape (q, q)
        ``pattern == l_u @ transform``.
    method : str
    """

    pattern: np.ndarray
    phi: np.ndarray
    congruence: float
    per_factor_congruence: np.ndarray
    kappa: float
    ridge_applied: float
    transform: np.ndarray
    method: str = field(default="omt")


def _as_target(target) -> TargetSpec:
    return target if isinstance(target, TargetSpec) else TargetSpec(target)


def _check_shapes(l_u: np.ndarray, tar: np.ndarray) -> None:
    if l_u.shape != tar.shape:
        raise DimensionError(f"loadings {l_u.shape} and target {tar.shape} differ in shape")
    if l_u.shape[1] > l_u.shape[0]:
        raise DimensionError("more factors than variables")


def build_icm_target(p: int, q: int) -> TargetSpec:
    """Block target in which variables are split into q equal consecutive blocks."""
    if p < 1 or q < 1:
        raise ValueError("p and q must be positive")
    if p % q:
        raise ValueError(f"q={q} does not divide p={p}; supply an explicit target")
    return TargetSpec(kronecker(np.eye(q), np.ones((p // q, 1))))


def tucker_congruence(a, b) -> tuple[float, np.ndarray]:
    """Column-wise Tucker congruence of ``a`` with ``b`` and its mean over columns."""
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape != b.shape:
        raise DimensionError(f"congruence needs equal shapes, got {a.shape} and {b.shape}")
    norms = np.sqrt(np.sum(a * a, axis=0) * np.sum(b * b, axis=0))
    if np.any(norms == 0.0):
        raise ValueError("congruence undefined for a zero column")
    per_factor = np.sum(a * b, axis=0) / norms
    return float(np.mean(per_factor)), per_factor


def orthogonal_target_rotate(l_u, target) -> tuple[np.ndarray, np.ndarray]:
    """
    Least-squares orthogonal rotation of ``l_u`` towards the target.

    Returns the rotated loadings and the orthogonal matrix ``tr`` with
    ``l1 = l_u @ tr`` minimising ``||l_u @ tr - target||_F``.
    """
    l_u = as_matrix(l_u, "loadings")
    tar = _as_target(target).matrix
    _check_shapes(l_u, tar)
    u, s, v = svd_thin(l_u.T @ tar)
    if s[-1] < RANK_TOL * s[0] or s[0] == 0.0:
        raise SingularMatrixError("target not identified against loadings")
    tr = u @ v.T
    return l_u @ tr, tr


def block_mean_loadings(l1, target) -> np.ndarray:
    """Salient-weighted mean loadings per target block (q x q)."""
    l1 = as_matrix(l1, "loadings")
    tar = _as_target(target).matrix
    _check_shapes(l1, tar)
    weights = l1 * tar
    try:
        return weights.T @ l1 @ inverse(weights.T @ tar)
    except SingularMatrixError as exc:
        raise SingularMatrixError(
            "salient loadings of a factor sum to zero; block means undefined"
        ) from exc


def factor_correlations(pattern, l_u) -> np.ndarray:
    """Correlations of the rotated factors implied by ``pattern`` and ``l_u @ l_u.T``."""
    pattern = as_matrix(pattern, "pattern")
    l_u = as_matrix(l_u, "loadings")
    if pattern.shape != l_u.shape:
        raise DimensionError(f"pattern {pattern.shape} and loadings {l_u.shape} differ in shape")
    # (P'P)^-1 P' L L' P (P'P)^-1 without forming the p x p common part
    proj = inverse(pattern.T @ pattern) @ pattern.T @ l_u
    phi = proj @ proj.T
    return (phi + phi.T) / 2.0


def _left_unit_diag(mat: np.ndarray) -> np.ndarray:
    # diag(M'M)^-1/2 @ M: rows are scaled, not columns
    norms = np.diag(mat.T @ mat)
    if np.min(norms) <= 0.0:
        raise SingularMatrixError("transformation matrix has a zero column")
    return np.diag(norms**-0.5) @ mat


def _pattern_scale(tn: np.ndarray) -> np.ndarray:
    return np.diag(np.diag(inverse(tn.T @ tn)) ** 0.5)


def omt_rotate(l_u, target, opts: RotationOptions | None = None) -> RotationSolution:
    """
    Oblique mean-target rotation.

    Parameters
    ----------
    l_u : array-like, shape (p, q)
        Unrotated (orthogonal) loadings of full column rank.
    target : TargetSpec or array-like
        Binary target, usually from :func:`build_icm_target`.
    opts : RotationOptions, optional
        Ridge safeguard settings. While the condition number of the cross-
        product of the block mean loadings exceeds ``kappa_max``, a ridge of
        ``ridge_step`` is added and a new candidate computed, up to
        ``max_ridge_iters`` candidates. The candidate with the highest mean
        congruence with the target is returned.

    Returns
    -------
    RotationSolution
    """
    opts = opts or RotationOptions()
    l_u = as_matrix(l_u, "loadings")
    spec = _as_target(target)
    tar = spec.matrix
    q = tar.shape[1]

    l1, tr = orthogonal_target_rotate(l_u, spec)
    l1m = block_mean_loadings(l1, spec)
    cross = l1m.T @ l1m
    kappa0 = condition_number(cross)

    best = None
    best_cong = -np.inf
    ridge = 0.0
    for _ in range(opts.max_ridge_iters):
        try:
            t = inverse(cross) @ l1m.T
            tn = _left_unit_diag(t)
            scale = _pattern_scale(tn)
        except SingularMatrixError:
            pass
        else:
            pattern = l1 @ tn @ scale
            cong, _ = tucker_congruence(pattern, tar)
            if cong > best_cong:
                best_cong = cong
                best = (pattern, tr @ tn @ scale, ridge)
        if condition_number(cross) > opts.kappa_max:
            cross = cross + opts.ridge_step * np.eye(q)
            ridge += opts.ridge_step
        else:
            break

    if best is None:
        raise SingularMatrixError(
            f"block mean loadings stay singular after {opts.max_ridge_iters} ridge steps"
        )
    pattern, transform, ridge_used = best
    return _solution(pattern, l_u, tar, transform, kappa0, ridge_used, "omt")


def ot_rotate(l_u, target) -> RotationSolution:
    """Conventional oblique target rotation of all loadings towards ``target``."""
    l_u = as_matrix(l_u, "loadings")
    spec = _as_target(target)
    tar = spec.matrix
    _check_shapes(l_u, tar)

    tt = inverse(l_u.T @ l_u) @ l_u.T @ tar
    tt = _left_unit_diag(tt)
    transform = tt @ _pattern_scale(tt)
    return _solution(l_u @ transform, l_u, tar, transform, 1.0, 0.0, "ot")


def _solution(pattern, l_u, tar, transform, kappa, ridge, method) -> RotationSolution:
    phi = factor_correlations(pattern, l_u)
    cong, per_factor = tucker_congruence(pattern, tar)
    return RotationSolution(
        pattern=pattern,
        phi=phi,
        congruence=cong,
        per_factor_congruence=per_factor,
        kappa=float(kappa),
        ridge_applied=float(ridge),
        transform=transform,
        method=method,
    )
