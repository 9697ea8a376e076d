"""Exception types shared by every module of the toolkit."""


class SantaloKitError(Exception):
    """Base class for all toolkit errors."""


class DegenerateBody(SantaloKitError):
    """Body is empty, lower-dimensional, or otherwise has no volume."""


class CenterOutside(SantaloKitError):
    """Polar center lies outside (or on the boundary of) the body; the polar is unbounded."""


class SolverFail(SantaloKitError):
    """An iterative solver did not reach its tolerance.

    Carries the best iterate found so callers can inspect or resume.
    """

    def __init__(self, message, best=None, residual=None):
        super().__init__(message)
        self.best = best
        self.residual = residual


class QuadFail(SantaloKitError):
    """Numerical quadrature did not converge to the requested tolerance."""


class DivergentKernel(SantaloKitError):
    """The radial kernel integral defining c_n diverges."""


class HypothesisFail(SantaloKitError):
    """A structural precondition (pointwise inequality, flag, symmetry) failed.

    ``witness`` holds the offending sample, when one exists.
    """

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class EmptyDomain(SantaloKitError):
    """Grid function has no finite values; its conjugate is undefined."""


class InputError(SantaloKitError):
    """Malformed configuration or serialized object."""
