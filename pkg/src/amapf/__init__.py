"""Optimal anonymous multi-robot path planning with lazy, conflict-guided assignment."""
from .cbs import ALL_VARIANTS, Solution, Solver, Variant, solve
from .grid import Cell, Instance, Workspace, parse_map, parse_scen, random_instance
from .validation import validate_solution

__all__ = [
    "ALL_VARIANTS",
    "Cell",
    "Instance",
    "Solution",
    "Solver",
    "Variant",
    "Workspace",
    "parse_map",
    "parse_scen",
    "random_instance",
    "solve",
    "validate_solution",
]
