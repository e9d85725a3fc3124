"""
Seeded Monte-Carlo study of OT versus OMT factor inter-correlations.

Each replication draws a sample correlation matrix from a population
independent-clusters model, extracts the correct number of factors by ULS
and rotates the unrotated loadings with both methods against the block
target. Every random number is derived from the study seed: condition ``i``
gets the sub-seed ``mix_seed(seed, i)`` and replication ``k`` of a condition
draws from the stream keyed by ``(sub_seed, k)``. Results therefore do not
depend on how replications are scheduled over worker processes.
"""

from __future__ import annotations

import csv
import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import NumericalError
from .extraction import uls_extract
from .linalg import as_matrix, cholesky_lower
from .model import (
    LoadingLevel,
    PopulationModel,
    build_population_loadings,
    build_population_model,
    build_uniform_phi,
)
from .rotation import TargetSpec, build_icm_target, omt_rotate, ot_rotate

logger = logging.getLogger(__name__)

_MASK64 = (1 << 64) - 1

PAPER_Q = (3, 6, 9, 12)
PAPER_PER_FACTOR = (5, 10)
PAPER_RHO = (0.0, 0.25, 0.50)
PAPER_N = (300, 900)
DEFAULT_REPS = 200


# -- random numbers ---------------------------------------------------------


class RngState:
    """
    Deterministic normal generator.

    Uniforms come from numpy's PCG64 (a 128-bit-state permuted congruential
    generator) seeded through ``SeedSequence(seed, spawn_key)``; standard
    normals are produced by the Box-Muller transform of pairs of uniforms on
    (0, 1].
    """

    def __init__(self, seed: int, spawn_key: tuple[int, ...] = ()):
        self.seed = int(seed) & _MASK64
        self.spawn_key = tuple(int(k) for k in spawn_key)
        seq = np.random.SeedSequence(self.seed, spawn_key=self.spawn_key)
        self._gen = np.random.Generator(np.random.PCG64(seq))
        self._spare: float | None = None

    def spawn(self, *key: int) -> "RngState":
        return RngState(self.seed, self.spawn_key + tuple(key))

    def _uniform_open0(self, size: int) -> np.ndarray:
        return 1.0 - self._gen.random(size)

    def standard_normal(self, shape) -> np.ndarray:
        count = int(np.prod(shape))
        pairs = (count + 1) // 2
        u1 = self._uniform_open0(pairs)
        u2 = self._uniform_open0(pairs)
        radius = np.sqrt(-2.0 * np.log(u1))
        angle = 2.0 * np.pi * u2
        z = np.concatenate((radius * np.cos(angle), radius * np.sin(angle)))
        return z[:count].reshape(shape)


def rng_next_standard_normal(rng: RngState) -> float:
    """Next standard normal deviate; the second deviate of each pair is cached."""
    if rng._spare is not None:
        z, rng._spare = rng._spare, None
        return z
    u1, u2 = rng._uniform_open0(2)
    radius = math.sqrt(-2.0 * math.log(u1))
    rng._spare = radius * math.sin(2.0 * math.pi * u2)
    return radius * math.cos(2.0 * math.pi * u2)


def mix_seed(seed: int, index: int) -> int:
    """64-bit sub-seed for stream ``index`` of ``seed``."""
    seq = np.random.SeedSequence(int(seed) & _MASK64, spawn_key=(int(index),))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def sample_correlation(sigma, n: int, rng: RngState) -> np.ndarray:
    """Pearson correlation matrix of ``n`` multivariate normal draws with covariance ``sigma``."""
    sigma = as_matrix(sigma, "sigma")
    p = sigma.shape[0]
    if n <= p:
        raise ValueError(f"sample size n={n} must exceed the number of variables p={p}")
    low = cholesky_lower(sigma)
    x = rng.standard_normal((n, p)) @ low.T
    x -= x.mean(axis=0)
    cov = x.T @ x
    sd = np.sqrt(np.diag(cov))
    r = cov / np.outer(sd, sd)
    r = (r + r.T) / 2.0
    np.fill_diagonal(r, 1.0)
    return r


# -- study design -----------------------------------------------------------


@dataclass(frozen=True)
class SimulationCondition:
    q: int
    per_factor: int
    level: LoadingLevel
    rho: float
    n: int

    def __post_init__(self):
        if self.q < 1 or self.per_factor < 1 or self.n < 2:
            raise ValueError(f"invalid condition {self}")
        if self.n <= self.p:
            raise ValueError(f"n={self.n} must exceed p={self.p}")

    @property
    def p(self) -> int:
        return self.q * self.per_factor

    @property
    def is_paper_condition(self) -> bool:
        return (
            self.q in PAPER_Q
            and self.per_factor in PAPER_PER_FACTOR
            and any(math.isclose(self.rho, r) for r in PAPER_RHO)
            and self.n in PAPER_N
        )

    @property
    def label(self) -> str:
        return f"n={self.n} p={self.p} q={self.q} {self.level.value} rho={self.rho:.2f}"


@dataclass(frozen=True)
class ReplicationOutcome:
    ot_congruence: float
    omt_congruence: float
    ot_mean_phi: float
    omt_mean_phi: float
    extraction_converged: bool
    rotation_failed: bool

    @property
    def valid(self) -> bool:
        return self.extraction_converged and not self.rotation_failed


@dataclass(frozen=True)
class ConditionResult:
    condition: SimulationCondition
    replications_requested: int
    replications_valid: int
    extraction_failures: int
    rotation_failures: int
    ot_congruence_mean: float
    ot_congruence_sd: float
    omt_congruence_mean: float
    omt_congruence_sd: float
    ot_phi_mean: float
    ot_phi_sd: float
    omt_phi_mean: float
    omt_phi_sd: float

    @property
    def bias_ot(self) -> float:
        return self.ot_phi_mean - self.condition.rho

    @property
    def bias_omt(self) -> float:
        return self.omt_phi_mean - self.condition.rho


def paper_conditions(rhos=PAPER_RHO) -> list[SimulationCondition]:
    """Study grid ordered by rho, loadings per factor, q, loading level and n."""
    return [
        SimulationCondition(q=q, per_factor=pf, level=level, rho=rho, n=n)
        for rho, pf, q, level, n in itertools.product(
            rhos, PAPER_PER_FACTOR, PAPER_Q, (LoadingLevel.LOW, LoadingLevel.HIGH), PAPER_N
        )
    ]


PRESETS = {
    "paper-table2": lambda: paper_conditions((0.25, 0.50)),
    "paper-tableA1": lambda: paper_conditions((0.0,)),
    "paper-all": paper_conditions,
}


def preset_conditions(name: str) -> list[SimulationCondition]:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None


def read_conditions_csv(path) -> list[SimulationCondition]:
    """Read conditions from a CSV with header columns n, q, per_factor, level, rho."""
    required = {"n", "q", "per_factor", "level", "rho"}
    conditions = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = required - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing column(s) {', '.join(sorted(missing))}")
        for line, row in enumerate(reader, start=2):
            try:
                cond = SimulationCondition(
                    q=int(row["q"]),
                    per_factor=int(row["per_factor"]),
                    level=LoadingLevel.parse(row["level"]),
                    rho=float(row["rho"]),
                    n=int(row["n"]),
                )
            except (TypeError, ValueError) as exc:
                raise ValueError(f"{path}, line {line}: {exc}") from None
            if not cond.is_paper_condition:
                logger.warning("%s, line %d: %s is outside the paper's design", path, line, cond.label)
            conditions.append(cond)
    if not conditions:
        raise ValueError(f"{path}: no conditions")
    return conditions


# -- replications -----------------------------------------------------------


@lru_cache(maxsize=64)
def _population(cond: SimulationCondition) -> tuple[PopulationModel, TargetSpec]:
    lam = build_population_loadings(cond.q, cond.per_factor, cond.level)
    model = build_population_model(lam, build_uniform_phi(cond.q, cond.rho))
    return model, build_icm_target(cond.p, cond.q)


def mean_offdiag(phi: np.ndarray) -> float:
    q = phi.shape[0]
    if q < 2:
        return math.nan
    return float(np.mean(phi[np.triu_indices(q, k=1)]))


_FAILED = dict(ot_congruence=math.nan, omt_congruence=math.nan, ot_mean_phi=math.nan, omt_mean_phi=math.nan)


def run_replication(cond: SimulationCondition, seed: int, index: int) -> ReplicationOutcome:
    model, target = _population(cond)
    rng = RngState(seed, spawn_key=(index,))
    try:
        r = sample_correlation(model.sigma, cond.n, rng)
        ext = uls_extract(r, cond.q)
    except NumericalError as exc:
        logger.debug("replication %d of %s: extraction error %s", index, cond.label, exc)
        return ReplicationOutcome(**_FAILED, extraction_converged=False, rotation_failed=False)
    if not ext.converged:
        return ReplicationOutcome(**_FAILED, extraction_converged=False, rotation_failed=False)
    try:
        ot = ot_rotate(ext.l_u, target)
        omt = omt_rotate(ext.l_u, target)
    except NumericalError as exc:
        logger.debug("replication %d of %s: rotation error %s", index, cond.label, exc)
        return ReplicationOutcome(**_FAILED, extraction_converged=True, rotation_failed=True)
    misaligned = bool(np.any(ot.per_factor_congruence <= 0) or np.any(omt.per_factor_congruence <= 0))
    return ReplicationOutcome(
        ot_congruence=ot.congruence,
        omt_congruence=omt.congruence,
        ot_mean_phi=mean_offdiag(ot.phi),
        omt_mean_phi=mean_offdiag(omt.phi),
        extraction_converged=True,
        rotation_failed=misaligned,
    )


def _run_chunk(cond: SimulationCondition, seed: int, start: int, stop: int) -> list[ReplicationOutcome]:
    return [run_replication(cond, seed, k) for k in range(start, stop)]


def _mean_sd(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    arr = arr[~np.isnan(arr)]
    if arr.size == 0:
        return math.nan, math.nan
    # summed in replication order so results do not depend on scheduling
    mean = math.fsum(arr) / arr.size
    if arr.size < 2:
        return mean, 0.0
    return mean, math.sqrt(math.fsum((arr - mean) ** 2) / (arr.size - 1))


def aggregate(cond: SimulationCondition, outcomes: list[ReplicationOutcome]) -> ConditionResult:
    valid = [o for o in outcomes if o.valid]
    stats = {}
    for name in ("ot_congruence", "omt_congruence", "ot_mean_phi", "omt_mean_phi"):
        stats[name] = _mean_sd([getattr(o, name) for o in valid])
    return ConditionResult(
        condition=cond,
        replications_requested=len(outcomes),
        replications_valid=len(valid),
        extraction_failures=sum(not o.extraction_converged for o in outcomes),
        rotation_failures=sum(o.extraction_converged and o.rotation_failed for o in outcomes),
        ot_congruence_mean=stats["ot_congruence"][0],
        ot_congruence_sd=stats["ot_congruence"][1],
        omt_congruence_mean=stats["omt_congruence"][0],
        omt_congruence_sd=stats["omt_congruence"][1],
        ot_phi_mean=stats["ot_mean_phi"][0],
        ot_phi_sd=stats["ot_mean_phi"][1],
        omt_phi_mean=stats["omt_mean_phi"][0],
        omt_phi_sd=stats["omt_mean_phi"][1],
    )


def _chunks(reps: int, parallelism: int) -> list[tuple[int, int]]:
    size = max(1, math.ceil(reps / (4 * parallelism)))
    return [(start, min(start + size, reps)) for start in range(0, reps, size)]


def run_study(
    conditions: list[SimulationCondition],
    reps: int = DEFAULT_REPS,
    seed: int = 0,
    parallelism: int = 1,
) -> list[ConditionResult]:
    """
    Run ``reps`` replications of every condition.

    Condition ``i`` uses the sub-seed ``mix_seed(seed, i)``, so the output is
    identical for every ``parallelism``.
    """
    if not conditions:
        raise ValueError("no conditions to run")
    if reps < 1:
        raise ValueError("reps must be at least 1")
    if parallelism < 1:
        raise ValueError("parallelism must be at least 1")
    seeds = [mix_seed(seed, i) for i in range(len(conditions))]
    return _run_seeded(list(conditions), seeds, reps, parallelism)


def run_condition(cond: SimulationCondition, reps: int = DEFAULT_REPS, seed: int = 0, parallelism: int = 1) -> ConditionResult:
    """Run one condition with replication streams keyed directly by ``seed``."""
    if reps < 1:
        raise ValueError("reps must be at least 1")
    return _run_seeded([cond], [seed], reps, parallelism)[0]


def _run_seeded(conditions, seeds, reps, parallelism) -> list[ConditionResult]:
    tasks = [(ci, start, stop) for ci in range(len(conditions)) for start, stop in _chunks(reps, parallelism)]
    per_condition: list[list[ReplicationOutcome]] = [[] for _ in conditions]
    if parallelism == 1:
        for ci, start, stop in tasks:
            per_condition[ci].extend(_run_chunk(conditions[ci], seeds[ci], start, stop))
    else:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            futures = [pool.submit(_run_chunk, conditions[ci], seeds[ci], start, stop) for ci, start, stop in tasks]
            # tasks are in (condition, replication) order; collecting in
            # submission order keeps the reduction order fixed
            for (ci, _, _), fut in zip(tasks, futures):
                per_condition[ci].extend(fut.result())
    results = []
    for cond, outcomes in zip(conditions, per_condition):
        res = aggregate(cond, outcomes)
        logger.info(
            "%s: OT phi %.3f, OMT phi %.3f (%d/%d valid)",
            cond.label, res.ot_phi_mean, res.omt_phi_mean, res.replications_valid, reps,
        )
        results.append(res)
    return results
