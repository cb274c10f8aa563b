"""
Numerical core of polyvem.

polycalc → mesh → quadrature → space → projectors → solver, with the CLI
commands layered on top.
"""

from .commands import (
    SolveCommands,
    SpaceCommands,
    create_command_registry,
    list_all_commands,
)

__all__ = [
    "SolveCommands",
    "SpaceCommands",
    "create_command_registry",
    "list_all_commands",
]

__version__ = "0.1.0"
