"""Exception hierarchy for causal-geometry."""

from typing import Any, Optional


class CausalGeometryError(Exception):
    """Base class for every error raised by the library."""

    def __init__(self, message: str, *, point: Any = None):
        super().__init__(message)
        self.point = point


class DomainError(CausalGeometryError):
    """A point lies outside the domain of a field or elementary function."""


class CapabilityError(CausalGeometryError):
    """A derivative order beyond what a field or jet carries was requested."""


class RegularityError(CausalGeometryError):
    """A Hessian, metric or shadow metric is singular or ill-conditioned."""

    def __init__(
        self, message: str, *, condition: Optional[float] = None, point: Any = None
    ):
        super().__init__(message, point=point)
        self.condition = condition


class PreconditionError(CausalGeometryError):
    """An operation was called on data that violates its precondition."""


class SamplingError(CausalGeometryError):
    """The on-cone sampler ran out of attempts."""


class ValidationError(CausalGeometryError, ValueError):
    """Invalid input data (metric, degrees, state lists, ...)."""


class ExpressionError(ValidationError):
    """Syntax, identifier or arity error in a defining-function expression."""

    def __init__(self, message: str, position: int, source: str = ""):
        super().__init__(f"{message} at offset {position}")
        self.position = position
        self.source = source


class ConfigError(ValidationError):
    """Invalid run configuration."""

    def __init__(self, message: str, position: Optional[tuple[int, int]] = None):
        if position is not None:
            message = f"{message} (line {position[0]}, column {position[1]})"
        super().__init__(message)
        self.position = position


__all__ = [
    "CausalGeometryError",
    "DomainError",
    "CapabilityError",
    "RegularityError",
    "PreconditionError",
    "SamplingError",
    "ValidationError",
    "ExpressionError",
    "ConfigError",
]
