"""hamflow: a numerical laboratory for regular Lagrangian flows of planar
divergence-free vector fields.

The package computes flows through the streamfunction (level-set) reduction,
cross-checks them against an adaptive Runge-Kutta oracle, verifies
quantitative BV/Sobolev regularity estimates on sampled point pairs, and
builds an explicit nested-cascade field whose flow map loses BV regularity,
measuring the blow-up of its crossing-time total variation.
"""

__version__ = "0.1.0"

from .errors import (
    DivergenceError,
    DomainError,
    HamflowError,
    NumericalError,
    ResolutionError,
    TransversalityError,
)
from .geometry import AxisRect, Point

__all__ = [
    "AxisRect",
    "Point",
    "HamflowError",
    "DomainError",
    "TransversalityError",
    "DivergenceError",
    "ResolutionError",
    "NumericalError",
    "__version__",
]
