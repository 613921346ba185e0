"""Periodic Willmore curve, its tilt, transition-layer profiles and the
approximate Cahn-Hilliard solution built on them, with numerical checks."""

from .approx import ApproximateSolution, FermiChart, assemble, globalize
from .curve import T_BAR, CurvatureProfile, build_curve, rescale
from .layers import C_STAR, D_STAR, LayerProfiles, ProfileTransformer
from .linwillmore import L0Operator, jacobi_fields
from .phibar import PhiBar, gbar, solve_mu01
from .residual import ResidualReport, cahn_hilliard_F, run_sweep, scaling_fit

__version__ = "0.1.0"

__all__ = [
    "ApproximateSolution",
    "FermiChart",
    "assemble",
    "globalize",
    "T_BAR",
    "CurvatureProfile",
    "build_curve",
    "rescale",
    "C_STAR",
    "D_STAR",
    "LayerProfiles",
    "ProfileTransformer",
    "L0Operator",
    "jacobi_fields",
    "PhiBar",
    "gbar",
    "solve_mu01",
    "ResidualReport",
    "cahn_hilliard_F",
    "run_sweep",
    "scaling_fit",
]
