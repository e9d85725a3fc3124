"""Population independent-clusters models and their implied correlation matrices."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import NotPositiveDefiniteError
from .linalg import as_matrix, cholesky_lower


class LoadingLevel(enum.Enum):
    """Salient loading level of a simulated block (mean .50 or .70)."""

    LOW = "low"
    HIGH = "high"

    @property
    def block(self) -> tuple[float, ...]:
        return _BLOCKS[self]

    @classmethod
    def parse(cls, text: str) -> "LoadingLevel":
        key = str(text).strip().lower()
        if key in ("low", "high"):
            return cls(key)
        # accept numeric spellings such as .50, 0.7, lambda50
        digits = "".join(ch for ch in key if ch.isdigit()).strip("0")
        if digits == "5":
            return cls.LOW
        if digits == "7":
            return cls.HIGH
        raise ValueError(f"unknown loading level {text!r}; use low or high")


_BLOCKS = {
    LoadingLevel.LOW: (0.40, 0.45, 0.50, 0.55, 0.60),
    LoadingLevel.HIGH: (0.60, 0.65, 0.70, 0.75, 0.80),
}


@dataclass(frozen=True)
class PopulationModel:
    lambda_: np.ndarray
    phi: np.ndarray
    psi2: np.ndarray
    sigma: np.ndarray

    @property
    def p(self) -> int:
        return self.lambda_.shape[0]

    @property
    def q(self) -> int:
        return self.lambda_.shape[1]

    @property
    def common(self) -> np.ndarray:
        """Common part ``lambda_ @ phi @ lambda_.T``."""
        return self.lambda_ @ self.phi @ self.lambda_.T


def build_population_loadings(q: int, per_factor: int, level: LoadingLevel) -> np.ndarray:
    """
    Independent-clusters loadings with ``per_factor`` salient loadings per factor.

    With ten loadings per factor each of the five block values appears twice
    in a row (.40, .40, .45, .45, ...).
    """
    if q < 1:
        raise ValueError("q must be at least 1")
    if per_factor not in (5, 10):
        raise ValueError(f"per_factor must be 5 or 10, got {per_factor}")
    block = np.repeat(level.block, per_factor // 5)
    return np.kron(np.eye(q), block.reshape(-1, 1))


def build_uniform_phi(q: int, rho: float) -> np.ndarray:
    if q < 1:
        raise ValueError("q must be at least 1")
    lower = -1.0 / (q - 1) if q > 1 else -np.inf
    if not lower < rho < 1.0:
        raise ValueError(f"rho={rho} gives a non positive definite {q}x{q} correlation matrix")
    phi = np.full((q, q), float(rho))
    np.fill_diagonal(phi, 1.0)
    return phi


def build_population_model(lambda_, phi) -> PopulationModel:
    """
    Population model with uniquenesses chosen so that sigma is a correlation matrix.

    Raises
    ------
    ValueError
        If ``phi`` is not a correlation matrix or a communality reaches 1.
    NotPositiveDefiniteError
        If the implied sigma is not positive definite.
    """
    lam = as_matrix(lambda_, "lambda")
    phi = as_matrix(phi, "phi")
    if phi.shape != (lam.shape[1], lam.shape[1]):
        raise ValueError(f"phi must be {lam.shape[1]}x{lam.shape[1]}, got {phi.shape}")
    if not np.allclose(np.diag(phi), 1.0, rtol=0, atol=1e-12):
        raise ValueError("phi must have a unit diagonal")
    try:
        cholesky_lower(phi)
    except NotPositiveDefiniteError as exc:
        raise NotPositiveDefiniteError("phi is not positive definite") from exc

    common = lam @ phi @ lam.T
    common = (common + common.T) / 2.0
    communality = np.diag(common).copy()
    bad = np.flatnonzero(communality >= 1.0)
    if bad.size:
        raise ValueError(f"communality >= 1 for variable(s) {', '.join(str(i + 1) for i in bad)}")
    psi2 = 1.0 - communality
    sigma = common.copy()
    np.fill_diagonal(sigma, 1.0)
    cholesky_lower(sigma)
    return PopulationModel(lambda_=lam, phi=phi, psi2=psi2, sigma=sigma)


# Unrotated orthogonal loadings of the worked population example: three
# blocks of six variables, salient .50, cross-loadings of +-.20 that cancel
# within every block.
TABLE1_LOADINGS = np.array(
    [
        [0.50, 0.20, -0.20],
        [0.50, -0.20, 0.20],
        [0.50, 0.20, -0.20],
        [0.50, -0.20, 0.20],
        [0.50, 0.20, -0.20],
        [0.50, -0.20, 0.20],
        [0.20, 0.50, -0.20],
        [-0.20, 0.50, 0.20],
        [0.20, 0.50, -0.20],
        [-0.20, 0.50, 0.20],
        [0.20, 0.50, -0.20],
        [-0.20, 0.50, 0.20],
        [0.20, -0.20, 0.50],
        [-0.20, 0.20, 0.50],
        [0.20, -0.20, 0.50],
        [-0.20, 0.20, 0.50],
        [0.20, -0.20, 0.50],
        [-0.20, 0.20, 0.50],
    ]
)
TABLE1_LOADINGS.setflags(write=False)
