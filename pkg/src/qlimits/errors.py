"""Exception types shared across the package."""


class QlimitsError(Exception):
    """Base class for all errors raised by qlimits."""


class ConfigError(QlimitsError, ValueError):
    """Invalid user configuration (unknown keys, unparsable values)."""


class NumericalError(QlimitsError):
    """A computation could not be completed reliably."""


class SingularMatrixError(NumericalError):
    """Raised when a matrix that must be inverted is singular or indefinite.

    The smallest eigenvalue is kept on the exception so callers sweeping over
    parameters can report how close to singular the matrix was.
    """

    def __init__(self, message, smallest_eigenvalue=None):
        super().__init__(message)
        self.smallest_eigenvalue = smallest_eigenvalue


class QuadratureError(NumericalError):
    """Non-finite integrand values or an unusable quadrature rule."""


class QuadratureResolutionWarning(UserWarning):
    """The quadrature rule is probably too coarse for an oscillatory integrand."""


class LocalRegimeWarning(UserWarning):
    """A linearized result was requested outside its range of validity."""
