"""Shadows of symplectic images of balls: linear algebra, flows and boundary tracking."""

from ._backend import NAME as BACKEND
from .hamflow import FlowResult, PolyHamiltonian, flow, flow_with_initial_map
from .symplinalg import (ComplexProjector, FormsContext, SympLinearMap, ball_volume, linear_shadow_volume,
                         random_symplectic, random_unitary, section_volume, wirtinger_check)
from .loops import FourierLoop, energy_area_gap
from .grassmann import GrassmannQuadrature, hopf_fiber_check, integrate_over_lines
from .shadowvol import BoundaryGrid, mc_shadow_volume, shadow_volume_curve, solve_boundary
from .expansion import ExpansionReport, expansion_coefficient, symmetry_condition, validate_expansion

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "BoundaryGrid", "ComplexProjector", "ExpansionReport", "FlowResult", "FormsContext", "FourierLoop",
    "GrassmannQuadrature", "PolyHamiltonian", "SympLinearMap", "ball_volume", "energy_area_gap",
    "expansion_coefficient", "flow", "flow_with_initial_map", "hopf_fiber_check", "integrate_over_lines",
    "linear_shadow_volume", "mc_shadow_volume", "random_symplectic", "random_unitary", "section_volume",
    "shadow_volume_curve", "solve_boundary", "symmetry_condition", "validate_expansion", "wirtinger_check",
]
