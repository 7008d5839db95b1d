"""Exception hierarchy.

Every error raised on purpose by the package derives from
:class:`HypOrdinalError`, so callers can catch the whole family at once.
"""


class HypOrdinalError(Exception):
    """Base class for all package errors."""


class DimensionError(HypOrdinalError, ValueError):
    """Array shapes or lengths do not match."""


class DomainError(HypOrdinalError, ValueError):
    """An input lies outside the domain of an operation."""


class ValidityError(HypOrdinalError, ValueError):
    """A point or matrix violates a structural invariant."""


class CapacityError(HypOrdinalError, ValueError):
    """A requested exact computation is too large to enumerate."""


class GenerationError(HypOrdinalError, RuntimeError):
    """Random instance generation could not satisfy its constraints."""


class ReconstructionError(HypOrdinalError, ValueError):
    """A Lorentz Gramian cannot be realized as hyperboloid points."""


class TrainingError(HypOrdinalError, FloatingPointError):
    """The optimizer met a non-finite value and aborted."""


class ScaleError(HypOrdinalError, OverflowError):
    """A construction exceeds the float64 range."""


class ConstructionError(HypOrdinalError, RuntimeError):
    """A margin embedding could not be certified."""


class ConfigError(HypOrdinalError, ValueError):
    """An experiment configuration failed validation."""
