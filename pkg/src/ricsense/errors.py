"""Exception types raised by ricsense."""


class RicsenseError(Exception):
    """Base class for all library errors."""


class NumericalError(RicsenseError):
    """A computation could not produce a trustworthy result."""


class NearSingularError(NumericalError):
    pass


class NotStabilizableError(NumericalError):
    pass


class NumericalFailureError(NumericalError):
    pass


class NotConvergedError(NumericalError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NonFiniteError(NumericalError):
    pass


class ValidationError(RicsenseError, ValueError):
    """Input violates a precondition (shape, structure, domain)."""


class DimensionError(ValidationError):
    pass


class NotUncoupledError(ValidationError):
    pass


class NotBlockDiagonalError(ValidationError):
    pass


class NotStableError(ValidationError):
    pass


class ZeroDiagonalBlockError(ValidationError):
    pass


class OutOfDomainError(ValidationError):
    pass


class RhoViolatedError(ValidationError):
    pass


class EmptyMaskError(ValidationError):
    pass


class GridMismatchError(ValidationError):
    pass
