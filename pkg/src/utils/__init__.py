"""
Utilities

Error hierarchy, command error handling and logging configuration.
"""

from .error_handler import (
    handle_command_error,
    exit_code_for,
    PolyVEMError,
    ConfigurationError,
    MeshValidationError,
    IncompatibleBasisError,
    ProjectorUnavailableError,
    NumericalError,
    SingularSystemError,
    InconsistentConstraintError,
)
from .logging_config import setup_logging, get_logger

__all__ = [
    # errors
    "handle_command_error",
    "exit_code_for",
    "PolyVEMError",
    "ConfigurationError",
    "MeshValidationError",
    "IncompatibleBasisError",
    "ProjectorUnavailableError",
    "NumericalError",
    "SingularSystemError",
    "InconsistentConstraintError",

    # logging
    "setup_logging",
    "get_logger",
]
