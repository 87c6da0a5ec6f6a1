"""Shared exception types."""


class HamflowError(Exception):
    """Base class for all package-specific errors."""


class DomainError(HamflowError):
    """A point lies outside a field's evaluation domain."""


class TransversalityError(HamflowError):
    """The directional lower bound b . e >= delta failed where it was assumed."""


class DivergenceError(HamflowError):
    """A vector field expected to be divergence-free is not, within tolerance."""

    def __init__(self, message, cell=None, residual=None):
        super().__init__(message)
        self.cell = cell
        self.residual = residual


class ResolutionError(HamflowError):
    """Requested computation cannot be resolved at a feasible grid size."""


class NumericalError(HamflowError):
    """An iterative numerical routine failed to converge."""
