"""Fractional Sobolev spaces on self-similar fractals: graph approximations,
energy forms, spectral calculus of the renormalized Laplacian and the
difference-operator experiments built on them."""

from .errors import (
    CapacityError,
    ConvergenceError,
    FractsobError,
    LevelMismatchError,
    ParameterError,
    PreconditionError,
    SpectralDomainError,
)
from .geometry import build_level, make_sg, make_vicsek

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "ConvergenceError",
    "FractsobError",
    "LevelMismatchError",
    "ParameterError",
    "PreconditionError",
    "SpectralDomainError",
    "build_level",
    "make_sg",
    "make_vicsek",
    "__version__",
]
