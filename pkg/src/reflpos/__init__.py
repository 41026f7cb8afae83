"""Numerical toolkit for reflection positive kernels and representations.

Submodules
----------
numerics      PSD checks, NNLS, quadrature rules
conformal     Lorentz group, conformal action on spheres, Cayley charts
kernels       kernel families, Gram assembly, phase predicates, witnesses
rp_hilbert    finite reflection positive Hilbert space models and GNS
integral_reps Laplace and Fourier-Laplace integral representations
cli           command-line front end
"""

__version__ = "0.1.0"

from . import conformal, integral_reps, kernels, numerics, rp_hilbert  # noqa: E402
from .errors import (  # noqa: E402
    ReflPosError,
    ValidationError,
    ReflectionPositivityError,
)
from .kernels import KernelFamily, gram, pd_phase_predicate, witness_search  # noqa: E402
from .numerics import psd_check  # noqa: E402

__all__ = [
    "__version__",
    "conformal",
    "integral_reps",
    "kernels",
    "numerics",
    "rp_hilbert",
    "ReflPosError",
    "ValidationError",
    "ReflectionPositivityError",
    "KernelFamily",
    "gram",
    "pd_phase_predicate",
    "witness_search",
    "psd_check",
]
