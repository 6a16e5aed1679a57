class AnnniError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(AnnniError, ValueError):
    """A parameter or input violates a documented precondition."""


class CapacityError(ValidationError):
    """Requested chain length is outside what the operation supports."""


class DimensionError(ValidationError):
    """A state vector does not have length 2**n_sites."""


class NormalizationError(ValidationError):
    """A state that must be unit-normalized is not."""


class UnconvergedError(AnnniError, RuntimeError):
    """An eigensolve did not reach the residual tolerance."""
