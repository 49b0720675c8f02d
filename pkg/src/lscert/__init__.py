"""Certified kernel-split reduction for parameterised equilibrium systems.

Workflow: build a ParametricSystem, split it at a singular equilibrium with
build_split_system, certify a validity region with certify_ls_region, then
study the reduced map through ReducedMap / series_coefficients /
trace_branches. The generic split-variable machinery (imft module) backs the
same certification for regular points.
"""

__version__ = "0.1.0"

from .errors import (
    ArityError,
    ConfigError,
    DimensionMismatch,
    DomainError,
    LscertError,
    NewtonDiverged,
    NonFinite,
    NonSingularJacobian,
    NotEquilibrium,
    ParseError,
    SingularDyf,
    SingularNewtonSystem,
    SingularReducedJacobian,
    UnknownIdentifier,
    UnknownModel,
    UnsupportedDimensions,
)
from .imft import (
    ImftQuantities,
    SplitFunction,
    SupremumEstimator,
    WitnessResult,
    certify_region,
    check_conditions,
    compute_M,
    estimate_L,
    imft_quantities,
    split_function,
    witness_check,
)
from .ls_bounds import (
    CertifiedRegion,
    FrontierPoint,
    LsBoundQuantities,
    RegionEntry,
    SplitSystem,
    build_split_system,
    certify_ls_region,
    check_ls_conditions,
    compute_ls_M,
    estimate_ls_L,
    ls_quantities,
)
from .reduction import (
    BranchPoint,
    ReducedMap,
    ReducedPoint,
    SeriesCoefficients,
    TraceResult,
    classify_series,
    in_certified_region,
    region_note,
    series_coefficients,
    solve_phi,
    trace_branches,
)
from .subspace import (
    SubspaceDecomposition,
    compute_decomposition,
    projection_onto_range,
    split_state,
)
from .system import (
    EvaluationPoint,
    ParametricSystem,
    builtin_model,
    evaluation_point,
    from_callable,
    is_bifurcation_candidate,
    newton_full,
    refine_equilibrium,
    system_from_expressions,
)
from .config import RunConfig, build_estimator, build_system, load_config, parse_config

__all__ = [
    "__version__",
    # errors
    "LscertError", "DimensionMismatch", "NonFinite", "NonSingularJacobian",
    "UnknownModel", "NotEquilibrium", "ParseError", "ArityError",
    "UnknownIdentifier", "DomainError", "SingularDyf", "SingularReducedJacobian",
    "NewtonDiverged", "SingularNewtonSystem", "UnsupportedDimensions", "ConfigError",
    # systems and decomposition
    "ParametricSystem", "EvaluationPoint", "evaluation_point", "from_callable",
    "builtin_model", "system_from_expressions", "newton_full", "refine_equilibrium",
    "is_bifurcation_candidate",
    "SubspaceDecomposition", "compute_decomposition", "projection_onto_range", "split_state",
    # generic split certification
    "SplitFunction", "split_function", "SupremumEstimator", "ImftQuantities",
    "compute_M", "estimate_L", "imft_quantities", "check_conditions", "certify_region",
    "witness_check", "WitnessResult",
    # kernel-split certification
    "SplitSystem", "build_split_system", "LsBoundQuantities", "compute_ls_M",
    "estimate_ls_L", "ls_quantities", "certify_ls_region", "check_ls_conditions",
    "CertifiedRegion", "RegionEntry", "FrontierPoint",
    # reduction
    "ReducedMap", "ReducedPoint", "solve_phi", "SeriesCoefficients",
    "series_coefficients", "classify_series", "BranchPoint", "TraceResult",
    "trace_branches", "in_certified_region", "region_note",
    # config
    "RunConfig", "load_config", "parse_config", "build_system", "build_estimator",
]
