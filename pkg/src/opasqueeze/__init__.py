"""Modeling, simulation and characterization of below-threshold OPA squeezed-light sources."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    AboveThresholdError,
    DomainError,
    IllConditionedError,
    InputError,
    InstabilityError,
    LayoutError,
    NonPhysicalTraceError,
)
from .quadrature import (  # noqa: E402
    REFERENCE_PARAMS,
    CavityConstants,
    OperatingPoint,
    SqueezerParams,
    VariancePair,
    apply_efficiency,
    apply_phase_jitter,
    decay_rate,
    from_db,
    normalize_and_correct,
    opa_variance_pair,
    to_db,
    uncertainty_product,
    variance_at_angle,
    visibility_to_efficiency,
)

__all__ = [
    "AboveThresholdError",
    "DomainError",
    "IllConditionedError",
    "InputError",
    "InstabilityError",
    "LayoutError",
    "NonPhysicalTraceError",
    "REFERENCE_PARAMS",
    "CavityConstants",
    "OperatingPoint",
    "SqueezerParams",
    "VariancePair",
    "apply_efficiency",
    "apply_phase_jitter",
    "decay_rate",
    "from_db",
    "normalize_and_correct",
    "opa_variance_pair",
    "to_db",
    "uncertainty_product",
    "variance_at_angle",
    "visibility_to_efficiency",
]
