"""Exception hierarchy.

Validation problems (bad parameters, wrong shapes, unsupported dimensions)
derive from :class:`ValidationError`; numerical breakdowns (quadrature that
does not settle, vanishing tail events, failed bracketing) derive from
:class:`NumericalFailure`.  The CLI maps these to exit codes 2 and 3.
"""


class LSMEError(Exception):
    """Base class for all package errors."""


class ValidationError(LSMEError, ValueError):
    """Invalid input: parameters, shapes, or model configuration."""


class DomainError(ValidationError):
    """A parameter lies outside the domain where the operation is defined."""


class UnsupportedDimensionError(ValidationError):
    pass


class DegeneratePairError(ValidationError):
    pass


class NumericalFailure(LSMEError, ArithmeticError):
    """A numerical method did not reach the requested accuracy."""

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details


class VanishingTailError(NumericalFailure):
    pass


class BracketingError(NumericalFailure):
    pass


class InsufficientExceedancesError(NumericalFailure):
    pass
