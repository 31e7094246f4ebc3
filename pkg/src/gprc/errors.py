"""Exception hierarchy shared by every module of the package."""


class GPrCError(Exception):
    """Base class for all package errors."""


class DomainError(GPrCError, ValueError):
    """An argument lies outside the domain of the operation."""


class InvalidParameterError(GPrCError, ValueError):
    """A distribution or resampling parameter is invalid."""


class InsufficientDataError(GPrCError, ValueError):
    """Not enough observations for the requested computation."""


class ShapeError(GPrCError, ValueError):
    """Inputs have incompatible lengths or dimensions."""


class NonConvergenceError(GPrCError, RuntimeError):
    """An iterative numerical routine failed to converge."""

    def __init__(self, message, replicate=None):
        if replicate is not None:
            message = f"replicate {replicate}: {message}"
        super().__init__(message)
        self.replicate = replicate


class DegenerateSupportError(GPrCError, ValueError):
    """A gridded density is identically zero on its grid."""


class SingularDesignError(GPrCError, ValueError):
    """The regression design matrix is rank deficient."""


class FactorizationError(GPrCError, ValueError):
    """A covariance matrix is not positive definite.

    ``minor`` is the 1-based order of the first leading minor that is not
    positive.
    """

    def __init__(self, message, minor=None):
        if minor is not None:
            message = f"{message} (leading minor {minor} is not positive)"
        super().__init__(message)
        self.minor = minor


class FitError(GPrCError, RuntimeError):
    """A variogram or model fit could not be carried out."""


class ConfigError(GPrCError, ValueError):
    """An experiment configuration or data file is malformed."""

    def __init__(self, message, path=None, line=None):
        prefix = ""
        if path is not None:
            prefix += f"{path}: "
        if line is not None:
            prefix += f"line {line}: "
        super().__init__(prefix + message)
        self.message = message
        self.path = path
        self.line = line
