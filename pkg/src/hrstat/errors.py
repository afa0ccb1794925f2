"""Exception types raised across the package."""


class HrstatError(Exception):
    """Base class for all package errors."""


class ContractViolation(HrstatError, ValueError):
    """An input violates a documented precondition (shape, symmetry, range)."""


class SingularMatrixError(HrstatError, ValueError):
    """A matrix that must be positive definite is not (numerically)."""


class DegenerateDataError(HrstatError, ValueError):
    """The data carry no usable information (zero radii, constant columns)."""


class DimensionError(HrstatError, ValueError):
    """Sample size is too small relative to the dimension for the method."""


class ModelError(HrstatError, ValueError):
    """A generating model could not be constructed for the requested size."""


class CalibrationError(HrstatError, RuntimeError):
    """Bootstrap or null calibration produced unusable moments."""


class NoConvergenceError(HrstatError, RuntimeError):
    """An iterative solver hit its iteration cap.

    The best iterate and its residual are attached so callers may decide
    whether to use it anyway.
    """

    def __init__(self, message, best=None, residual=None):
        super().__init__(message)
        self.best = best
        self.residual = residual
