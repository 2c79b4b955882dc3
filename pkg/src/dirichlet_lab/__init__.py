"""Exact-arithmetic laboratory for uniform Diophantine approximation.

Best-approximation functions of real matrices under arbitrary norms,
explicit constructions with prescribed Dirichlet constant, spectrum
estimates, transference checks and closed-form measure constants.
"""

import sys

__version__ = "0.1.0"

# construction levels are integers with hundreds of thousands of digits
if hasattr(sys, "set_int_max_str_digits"):
    sys.set_int_max_str_digits(0)

from .exactnum import Interval, ExactReal, Literal, SeriesReal, QuadraticReal, LinearCombination
from .normspace import NormDescriptor, max_norm, p_norm, weighted_max_norm, custom_norm
from .bestapprox import (
    ApproxProblem,
    ApproxRecord,
    BudgetExceeded,
    best_approx_sequence,
    dirichlet_box_nonempty,
    psi,
    psi_with_witness,
)

__all__ = [
    "__version__", "Interval", "ExactReal", "Literal", "SeriesReal", "QuadraticReal",
    "LinearCombination", "NormDescriptor", "max_norm", "p_norm", "weighted_max_norm",
    "custom_norm", "ApproxProblem", "ApproxRecord", "BudgetExceeded", "best_approx_sequence",
    "dirichlet_box_nonempty", "psi", "psi_with_witness",
]
