"""Exception types raised by fractsob."""


class FractsobError(Exception):
    """Base class for all library errors."""


class ParameterError(FractsobError, ValueError):
    """Invalid construction parameter (fractal family, level, exponent)."""


class CapacityError(FractsobError):
    """A requested level graph exceeds the configured vertex limit."""


class LevelMismatchError(FractsobError, ValueError):
    """A function does not match the level graph it is used with."""


class SpectralDomainError(FractsobError, ValueError):
    """A spectral multiplier is singular on the spectrum it is applied to."""


class PreconditionError(FractsobError, ValueError):
    """A hypothesis or operation precondition does not hold."""


class ConvergenceError(FractsobError, RuntimeError):
    """An iterative solver or limit estimate failed to converge."""
