"""Exception types raised by the numerical routines."""


class GribovLabError(Exception):
    """Base class for all package errors."""


class ParameterError(GribovLabError, ValueError):
    """Invalid couplings, truncations or grid values."""


class PoleProximityError(GribovLabError, ValueError):
    """A spectral parameter sits too close to an unperturbed eigenvalue."""


class ConvergenceError(GribovLabError, RuntimeError):
    """An iterative solver or quadrature rule failed to converge.

    ``diagnostics`` carries whatever the failing routine knew at the time
    (iteration counts, last change, orders tried).
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class DefectiveSpectrumError(ConvergenceError):
    """The eigenvector matrix is numerically rank deficient."""
