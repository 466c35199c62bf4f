"""Exception types raised across the package."""


class RandNLSError(Exception):
    """Base class for library errors."""


class DomainTooSmallError(RandNLSError, ValueError):
    """The computational box cannot contain the requested modes."""


class ResolutionError(RandNLSError, ValueError):
    """A grid does not resolve a requested mode.

    ``mode`` is the 1-based index of the first unresolved mode, when known.
    """

    def __init__(self, message, mode=None):
        super().__init__(message)
        self.mode = mode


class BasisMismatchError(RandNLSError, ValueError):
    """Objects bound to different bases or grids were combined."""


class CapabilityError(RandNLSError, ValueError):
    """The requested parameter combination is not supported."""


class NumericError(RandNLSError, ArithmeticError):
    """A numerical kernel failed to converge."""


class UsageError(RandNLSError, ValueError):
    """Invalid experiment configuration or command-line usage."""


class EmptyBandError(RandNLSError, ValueError):
    """A spectral-projector query selected no modes."""
