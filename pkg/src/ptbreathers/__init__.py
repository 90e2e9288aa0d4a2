"""Breathers of the PT-symmetric discrete NLS lattice derived from coupled pendula."""

from .model import ModelParams, UVState
from .dimer import DimerPoint, solve_for_E, classify_branches
from .continuation import BreatherSolution, newton_solve, continue_eps, continue_E, solve_breather
from .spectral import assemble_hessian, eigen_spectrum, stability_index

__version__ = "0.1.0"

__all__ = [
    "ModelParams",
    "UVState",
    "DimerPoint",
    "solve_for_E",
    "classify_branches",
    "BreatherSolution",
    "newton_solve",
    "continue_eps",
    "continue_E",
    "solve_breather",
    "assemble_hessian",
    "eigen_spectrum",
    "stability_index",
    "__version__",
]
