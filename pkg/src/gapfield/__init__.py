"""Field concentration between two close-to-touching convex inclusions.

The main entry points are :func:`place_at_gap` to build a configuration,
:class:`GapProblem` to discretize it, :func:`solve_perfect` and
:func:`solve_insulating` for the two boundary-value problems, and
:func:`decompose` for the splitting into singular parts and remainders.
"""

from .errors import (AccuracyError, AssemblyError, ConfigError, ConvergenceError,
                     DomainError, GapFieldError, NearZoneError, OracleError)
from .geometry import Curve, InclusionPair, closest_points, curvature, place_at_gap
from .singular import DiskSingular, build_q, gap_asymptotic_q
from .solver import (GapProblem, HarmonicBackground, decompose, grad_u,
                     inner_product_hg, solve_insulating, solve_perfect)
from .spectral import eigenfunction_g, spectrum

__version__ = "0.1.0"

__all__ = [
    "AccuracyError", "AssemblyError", "ConfigError", "ConvergenceError",
    "DomainError", "GapFieldError", "NearZoneError", "OracleError",
    "Curve", "InclusionPair", "closest_points", "curvature", "place_at_gap",
    "DiskSingular", "build_q", "gap_asymptotic_q",
    "GapProblem", "HarmonicBackground", "decompose", "grad_u",
    "inner_product_hg", "solve_insulating", "solve_perfect",
    "eigenfunction_g", "spectrum",
]
