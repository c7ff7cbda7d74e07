"""Solvers: the embedded simplex, the external bridge and the feasibility audit."""

from .external import ENV_COMMAND, ExternalSolverConfig, ExternalSolverError, SolutionFileError, solve_external
from .feasibility import FeasibilityReport, Violation, check_feasibility
from .simplex import ProblemTooLarge, SimplexConfig, SimplexError, farkas_gap, solve_simplex

__all__ = [
    "ENV_COMMAND", "ExternalSolverConfig", "ExternalSolverError", "FeasibilityReport", "ProblemTooLarge",
    "SimplexConfig", "SimplexError", "SolutionFileError", "Violation", "check_feasibility", "farkas_gap",
    "solve_external", "solve_simplex",
]
