"""Exception hierarchy."""


class LineFibError(Exception):
    """Base class for all errors raised by linefib."""


class OutsideDomain(LineFibError):
    pass


class AntipodalInput(LineFibError):
    pass


class NotInPlane(LineFibError):
    pass


class NoConvergence(LineFibError):
    pass


class OnBoundaryFiber(LineFibError):
    """The point lies on a fiber from a boundary-line family, not on a generator fiber."""


class CapExceeded(LineFibError):
    pass


class NearSeam(LineFibError):
    pass


class EmptyEstimate(LineFibError):
    pass


class ConfigError(LineFibError):
    pass


class ViolationFound(LineFibError):
    """A structural check failed; ``witness`` carries the offending data."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class MidpointNotRealized(ViolationFound):
    """A geodesic midpoint of two sampled field directions is not attained."""


class CanyonFound(ViolationFound):
    """A pushoff curve backtracks: its angles are not monotone."""
