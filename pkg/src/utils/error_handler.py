# src/utils/error_handler.py
import functools
import sys
import structlog
from typing import Callable
from pydantic import ValidationError as PydanticValidationError

logger = structlog.get_logger()

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_CONFIG = 2


class PolyVEMError(Exception):
    """Base exception of the polyharmonic VEM package"""
    exit_code = EXIT_NUMERICAL


class ConfigurationError(PolyVEMError):
    """Invalid run configuration or space parameters"""
    exit_code = EXIT_CONFIG


class MeshValidationError(PolyVEMError):
    """Malformed or non-conforming mesh"""

    def __init__(self, message: str, cell: int | None = None):
        self.cell = cell
        if cell is not None:
            message = f"cell {cell}: {message}"
        super().__init__(message)


class IncompatibleBasisError(PolyVEMError):
    """Polynomial operands live in different scaled frames"""
    pass


class ProjectorUnavailableError(PolyVEMError):
    """Operator requested that the configured space cannot compute"""
    pass


class NumericalError(PolyVEMError):
    """Numerical failure in a solve or factorization"""
    pass


class SingularSystemError(NumericalError):
    """Singular or non-SPD linear system"""
    pass


class InconsistentConstraintError(NumericalError):
    """Inhomogeneous boundary constraints admit no solution"""
    pass


def exit_code_for(error: BaseException) -> int:
    """Map an exception to the CLI exit code."""
    if isinstance(error, PydanticValidationError):
        return EXIT_CONFIG
    if isinstance(error, PolyVEMError):
        return error.exit_code
    return EXIT_NUMERICAL


def handle_command_error(func: Callable) -> Callable:
    """Command error handler decorator.

    The wrapped command returns an exit code; any exception escaping it is
    logged and converted, so callers never see a traceback.
    """

    @functools.wraps(func)
    def wrapper(*args, **kwargs) -> int:
        try:
            return func(*args, **kwargs)
        except Exception as e:
            code = exit_code_for(e)
            logger.error(
                "Command execution error",
                command=func.__name__,
                error_type=type(e).__name__,
                error=str(e),
                exit_code=code,
                exc_info=code != EXIT_CONFIG,
            )
            print(f"error: {e}", file=sys.stderr)
            return code

    return wrapper
