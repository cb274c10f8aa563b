"""
Data Models Module

Validated value objects shared by the numerical core and the command layer.
"""

# Core data models
from .data_models import (
    SOLUTION_NAMES,
    LoadCase,
    SpaceParams,
    DofKind,
    VertexDerivative,
    EdgeMoment,
    CellMoment,
    CellMomentExtra,
    DofDescriptor,
    ErrorReport,
    TraceDegreeRow,
    SpaceCheckReport,
    RunConfig,
)

# Command schemas
from .command_schemas import (
    BaseOutput,
    SolveOutput,
    ConvergenceOutput,
    SpaceCheckOutput,
)

__all__ = [
    # Core data models
    "SOLUTION_NAMES",
    "LoadCase",
    "SpaceParams",
    "DofKind",
    "VertexDerivative",
    "EdgeMoment",
    "CellMoment",
    "CellMomentExtra",
    "DofDescriptor",
    "ErrorReport",
    "TraceDegreeRow",
    "SpaceCheckReport",
    "RunConfig",

    # Output schemas
    "BaseOutput",
    "SolveOutput",
    "ConvergenceOutput",
    "SpaceCheckOutput",
]
