"""Exception types shared across the package.

Every error raised by this package derives from AnisoError so callers can
catch the whole family at once.  The CLI maps subfamilies to exit codes.
"""


class AnisoError(Exception):
    """Base class for all package errors."""


class NonSquareError(AnisoError):
    """Matrix input is not square (or not 2-dimensional)."""


class EigenvalueNotExpandingError(AnisoError):
    """Some eigenvalue has modulus <= 1; the matrix does not expand."""


class NumericalFailureError(AnisoError):
    """A numerical routine failed to converge or produced garbage."""


class WindowExhaustedError(AnisoError):
    """A bounded integer scan ended without finding the requested level."""


class DegenerateFitError(AnisoError):
    """Too few (or too collinear) data points to fit an exponent."""


class BudgetExceededError(AnisoError):
    """An enumeration or iteration count crossed its configured budget."""


class NotNormalizedError(AnisoError):
    """The dilation lacks the contraction property an operation requires."""


class ResolutionTooCoarseError(AnisoError):
    """A sample lattice is too coarse for the requested computation."""


class ConfigInvalidError(AnisoError):
    """Experiment configuration failed validation."""


class InputInvalidError(AnisoError):
    """Operation input violates a documented precondition."""


class TailNotNegligibleWarning(UserWarning):
    """The truncated dilation range contributes more than the tail criterion."""
