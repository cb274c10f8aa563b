# src/core/commands/__init__.py
"""
CLI Commands Module

Each command class groups related subcommands; every handler takes a
validated RunConfig and returns a process exit code.
"""

from .base_commands import BaseCommands
from .solve_commands import SolveCommands
from .space_commands import SpaceCommands, check_space

__all__ = [
    "BaseCommands",
    "SolveCommands",
    "SpaceCommands",
    "check_space",
    "get_all_commands",
    "create_command_registry",
    "list_all_commands",
]


def get_all_commands(report_processor=None, stream=None):
    """
    Create instances of all command classes with the provided dependencies.

    Returns:
        dict: Dictionary mapping category names to command instances
    """
    return {
        "solve": SolveCommands(report_processor, stream),
        "diagnostics": SpaceCommands(report_processor, stream),
    }


def create_command_registry(report_processor=None, stream=None):
    """
    Map subcommand names to their handlers.

    Returns:
        dict: Dictionary mapping subcommand names to bound handler methods
    """
    commands = get_all_commands(report_processor, stream)

    registry = {}

    solve_commands = commands["solve"]
    registry["solve"] = solve_commands.solve
    registry["convergence"] = solve_commands.convergence

    diagnostics = commands["diagnostics"]
    registry["space-check"] = diagnostics.space_check

    return registry


COMMAND_CATEGORIES = {
    "solve": {
        "name": "Solve Commands",
        "description": "Discrete solves and convergence studies with manufactured solutions",
        "commands": ["solve", "convergence"],
    },
    "diagnostics": {
        "name": "Space Diagnostics",
        "description": "Structural checks of the virtual element space",
        "commands": ["space-check"],
    },
}

COMMAND_DESCRIPTIONS = {
    "solve": "Run one solve and report energy, H^p1 seminorm and L2 errors",
    "convergence": "Solve on a range of mesh levels and fit the convergence rates",
    "space-check": "Print DOF counts, edge-trace degrees and projector consistency checks",
}


def list_all_commands():
    """
    List all available commands with their descriptions, by category.
    """
    result = {}
    for category, info in COMMAND_CATEGORIES.items():
        result[category] = {
            "category_name": info["name"],
            "category_description": info["description"],
            "commands": [
                {"name": name, "description": COMMAND_DESCRIPTIONS.get(name, "No description available")}
                for name in info["commands"]
            ],
        }
    return result
