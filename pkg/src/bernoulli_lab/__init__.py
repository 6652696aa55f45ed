"""Numerical laboratory for two-phase Bernoulli free boundaries on half-balls."""

from .blowup import BlowupSequence, fit_halfplane_profile, generate_sequence, scaling_identity_check, uniform_distance
from .domain import Ball, HalfBallGrid, MatrixField, ProblemSpec, ScalarField, blowup_field, rescale_coefficients
from .freeboundary import (
    ConeReport,
    FreeBoundary,
    cone_membership,
    extract_free_boundary,
    indicator_l1_distance,
    positivity_density,
    sigma_profile,
)
from .functional import dirichlet_energy, energy, smoothed_energy
from .minimizer import Schedule, minimize, perturbation_audit
from .oracle1d import minimize_1d_discrete, solve_1d_exact
from .presets import build_spec
from .reports import CheckReport
from .verify import check_h1_bound, check_linear_growth, check_nondegeneracy, check_subharmonic

__version__ = "0.1.0"

__all__ = [
    "Ball",
    "BlowupSequence",
    "CheckReport",
    "ConeReport",
    "FreeBoundary",
    "HalfBallGrid",
    "MatrixField",
    "ProblemSpec",
    "ScalarField",
    "Schedule",
    "blowup_field",
    "build_spec",
    "check_h1_bound",
    "check_linear_growth",
    "check_nondegeneracy",
    "check_subharmonic",
    "cone_membership",
    "dirichlet_energy",
    "energy",
    "extract_free_boundary",
    "fit_halfplane_profile",
    "generate_sequence",
    "indicator_l1_distance",
    "minimize",
    "minimize_1d_discrete",
    "perturbation_audit",
    "positivity_density",
    "rescale_coefficients",
    "scaling_identity_check",
    "sigma_profile",
    "smoothed_energy",
    "solve_1d_exact",
    "uniform_distance",
]
