"""Exception types shared across the package."""


class TorustipError(Exception):
    """Base class for all package errors."""


class ValidationError(TorustipError):
    """A configuration value violates a documented constraint."""


class InvalidDelay(ValidationError):
    """Delay shorter than one integration step."""


class NonFiniteState(TorustipError):
    """The state left the finite range: numerical blow-up or bad step size."""


class SeriesTooShort(TorustipError):
    """Time series shorter than the requested observation window."""


class IncommensurateSampling(TorustipError):
    """Sampling interval does not divide the forcing period."""


class InsufficientData(TorustipError):
    """Not enough section points for a reliable classification."""


class DegenerateGeometry(TorustipError):
    """Section points give no usable angles (radii collapse at the centroid)."""
