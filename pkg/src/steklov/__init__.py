"""Steklov eigenvalues of planar star-shaped domains and their shape perturbation."""

__version__ = "0.1.0"

from .dtn import DtnOperator, SteklovSpectrum, assemble_dtn, cluster_report, steklov_spectrum
from .exceptions import *  # noqa: F401,F403
from .genericity import (
    criticality_scan,
    psi_functional,
    q_functional,
    random_split_experiment,
    unique_continuation_check,
)
from .geometry import BoundaryCurve, BoundaryField, CurveSpec, build_curve, fourier_field
from .harmonic import HarmonicFunction, solve_dirichlet
from .perturbation import (
    PerturbationField,
    dt_dtn_general,
    dt_dtn_normal,
    dt_harmonic_extension,
    eigenvalue_derivative,
    fd_eigenvalue_derivative,
    splitting_matrix,
)
from .estimator import SteklovSolver
