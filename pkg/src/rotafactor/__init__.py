"""Oblique mean-target (OMT) and oblique target (OT) factor rotation."""

from .errors import (
    ConvergenceError,
    DimensionError,
    NotPositiveDefiniteError,
    NumericalError,
    RotafactorError,
    SingularMatrixError,
)
from .extraction import ExtractionResult, uls_extract
from .model import (
    TABLE1_LOADINGS,
    LoadingLevel,
    PopulationModel,
    build_population_loadings,
    build_population_model,
    build_uniform_phi,
)
from .rotation import (
    RotationOptions,
    RotationSolution,
    TargetSpec,
    block_mean_loadings,
    build_icm_target,
    factor_correlations,
    omt_rotate,
    orthogonal_target_rotate,
    ot_rotate,
    tucker_congruence,
)
from .simulation import (
    ConditionResult,
    ReplicationOutcome,
    RngState,
    SimulationCondition,
    run_condition,
    run_study,
    sample_correlation,
)

__version__ = "0.1.0"
