"""Numerical toolkit for the fractional p-Laplacian on bounded domains.

Submodules: ``core`` (grids, grid functions, domains, certificates),
``operator`` (principal-value evaluation and closed-form reductions),
``barriers`` (barrier families and their sign certificates), ``solver``
(variational Dirichlet and obstacle problems), ``perron`` (envelopes),
``probes`` (boundary-regularity experiments), ``config`` and ``cli``.
"""

from .core import (
    CertificateReport,
    DomainMask,
    FracParams,
    Grid,
    GridFunction,
    constant,
    make_domain,
    sample_profile,
)
from .operator import eval_profile_1d, eval_pv
from .quadrature import PRESETS, QuadratureSpec
from .solver import NonConvergence, solve_dirichlet, solve_obstacle

__version__ = "0.1.0"

__all__ = [
    "CertificateReport",
    "DomainMask",
    "FracParams",
    "Grid",
    "GridFunction",
    "NonConvergence",
    "PRESETS",
    "QuadratureSpec",
    "constant",
    "eval_profile_1d",
    "eval_pv",
    "make_domain",
    "sample_profile",
    "solve_dirichlet",
    "solve_obstacle",
]
