"""Exception hierarchy shared by the library and the CLI exit-code mapping."""


class CornerCGOError(Exception):
    """Base class for all library errors."""


class ConfigurationError(CornerCGOError, ValueError):
    """Invalid parameters, grid sizes or config-file content."""


class DomainError(CornerCGOError, ValueError):
    """A point lies outside the domain of a function (origin, branch cut)."""


class PreconditionError(CornerCGOError, ValueError):
    """An operation was called outside the parameter range it is valid for."""


class NumericalError(CornerCGOError, ArithmeticError):
    """Non-finite values or failed quadrature."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ConvergenceError(NumericalError):
    """An iteration hit its cap; ``partial`` holds the last iterate."""

    def __init__(self, message, partial=None, diagnostics=None):
        super().__init__(message, diagnostics)
        self.partial = partial


class DivergenceError(NumericalError):
    """The Neumann series terms kept growing: h is too large for contraction."""
