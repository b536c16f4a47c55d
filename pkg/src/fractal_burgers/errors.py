"""Exception hierarchy shared by every module of the package."""


class FractalBurgersError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(FractalBurgersError, ValueError):
    """An argument lies outside the admissible parameter domain."""


class ConvergenceError(FractalBurgersError, RuntimeError):
    """An iterative or adaptive procedure failed to reach its tolerance."""


class QuadratureError(ConvergenceError):
    """Adaptive quadrature stalled (usually mis-declared endpoint exponents)."""


class WrapAroundError(FractalBurgersError, RuntimeError):
    """A gridded convolution would exceed its aliasing budget."""


class StepRejected(ConvergenceError):
    """A time step grew the solution by more than the allowed factor."""


class MassAnomaly(FractalBurgersError, RuntimeError):
    """The grid mass of a profile drifted away from the prescribed mass."""


class ProfileFormatError(FractalBurgersError, OSError):
    """A profile or report file is missing, unreadable or inconsistent."""
