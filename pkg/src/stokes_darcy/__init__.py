"""Coupled Stokes-Darcy flow with generalised interface conditions.

Macroscale MAC solver, manufactured-solution benchmark, pore-scale
computation of the effective interface coefficients and the
well-posedness check k_tilde > C R^2.
"""

from .geometry import BoundaryLayerStripe, UnitCellGeometry, rasterise
from .grid import CoupledField, MacGrid, Rect, build_grid, relative_l2_error
from .macro import (
    InterfaceCoefficients,
    PorousMediumParams,
    ProblemSpec,
    apply_operator,
    assemble,
    solve_coupled,
)
from .microscale import solve_bl_beta, solve_bl_t, solve_cell, sweep_interface
from .mms import MmsCase, exact_solution, mms_forcing, run_convergence
from .sparse import SparseSystem, solve
from .wellposedness import WellPosednessReport, check, max_admissible_C

__version__ = "0.1.0"

__all__ = [
    "BoundaryLayerStripe", "UnitCellGeometry", "rasterise",
    "CoupledField", "MacGrid", "Rect", "build_grid", "relative_l2_error",
    "InterfaceCoefficients", "PorousMediumParams", "ProblemSpec", "apply_operator", "assemble", "solve_coupled",
    "solve_bl_beta", "solve_bl_t", "solve_cell", "sweep_interface",
    "MmsCase", "exact_solution", "mms_forcing", "run_convergence",
    "SparseSystem", "solve",
    "WellPosednessReport", "check", "max_admissible_C",
]
