"""Exception types raised across the package."""


class SsosError(Exception):
    """Base class for all package errors."""


class DimensionError(SsosError, ValueError):
    """Variable counts or vector lengths do not line up."""


class ParameterError(SsosError, ValueError):
    """An argument is outside its admissible range."""


class StructureError(SsosError, ValueError):
    """A cluster structure or SDP layout is malformed."""


class InfeasibleAssemblyError(SsosError):
    """A monomial of the target polynomial is not expressible in the basis."""

    def __init__(self, alpha, message=None):
        self.alpha = tuple(alpha)
        super().__init__(message or f"monomial {self.alpha} is not a product of two basis entries")


class ExtractionError(SsosError):
    """A quantity cannot be read off a solution."""


class GenerationError(SsosError):
    """Random instance generation failed within its retry budget."""


class DivergenceError(SsosError, ArithmeticError):
    """A local solve produced a non-finite value."""
