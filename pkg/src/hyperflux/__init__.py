"""Numerical verification of the integral identities behind the divergence
theorem and the change-of-variables formula."""

from .expr import FieldExpr, MapExpr, parse_map, parse_scalar
from .geom import Ball, Box, Graph, ParamSurface, PiecewiseSurface, boundary
from .quad import Mollifier, QuadScheme, flux, integrate_surface, integrate_volume, mc_estimate, mollify
from .theorems import (
    VerifyReport,
    ball_exhaustion_check,
    check_cofactor_flux,
    check_cov,
    check_cov_singly,
    check_divergence,
    check_hadamard,
    potential_Q,
)
from .retract import bump_field, check_nonretraction, fixed_point_search

__version__ = "0.1.0"
