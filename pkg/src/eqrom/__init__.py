"""Structure-preserving reduced-order models for EQ-reformulated gradient flows."""

from .errors import (
    AssemblyError,
    ConfigError,
    DimensionError,
    EqromError,
    FormatError,
    ModelError,
    NumericError,
    SolvabilityError,
    SolverError,
)
from .model import ModelKind, ModelSpec, build_model
from .spectral import Grid2D

__version__ = "0.1.0"

__all__ = [
    "AssemblyError",
    "ConfigError",
    "DimensionError",
    "EqromError",
    "FormatError",
    "Grid2D",
    "ModelError",
    "ModelKind",
    "ModelSpec",
    "NumericError",
    "SolvabilityError",
    "SolverError",
    "build_model",
]
