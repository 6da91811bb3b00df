"""Blind interference alignment with reconfigurable receive antennas.

Scheme construction, finite-field rank verification, link simulation and
closed-form sum-DoF values for the K-user SISO interference channel.
"""

__version__ = "0.1.0"

from .bounds import asymptotic_gap, outer_bound_curve, verify_r_optimality
from .scheme import (
    BiaScheme,
    ConstructionError,
    ParameterError,
    SchemeParams,
    block_length,
    build_scheme,
    coalition_shared_vector,
    optimal_r,
    sum_dof_formula,
)
from .verify import VerificationReport, achieved_dof, verify

__all__ = [
    "BiaScheme",
    "ConstructionError",
    "ParameterError",
    "SchemeParams",
    "VerificationReport",
    "achieved_dof",
    "asymptotic_gap",
    "block_length",
    "build_scheme",
    "coalition_shared_vector",
    "optimal_r",
    "outer_bound_curve",
    "sum_dof_formula",
    "verify",
    "verify_r_optimality",
]
