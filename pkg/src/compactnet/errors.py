"""Exception types shared across the package."""


class CompactNetError(Exception):
    """Base class for all library errors."""


class ShapeError(CompactNetError, ValueError):
    """Array dimensions do not agree."""


class DomainError(CompactNetError, ValueError):
    """An argument is outside the mathematical domain of the operation."""


class GeometryError(CompactNetError, ValueError):
    """Invalid convolution geometry (window out of bounds, bad stride, ...)."""


class CapacityError(CompactNetError, RuntimeError):
    """A dense computation would exceed the configured size guard."""


class DivergenceError(CompactNetError, RuntimeError):
    """An iterative solver blew up; carries the iteration index."""

    def __init__(self, message: str, iteration: int | None = None):
        super().__init__(message)
        self.iteration = iteration


class ConditionError(CompactNetError, ValueError):
    """A matrix or vector is too degenerate for the requested diagnostic."""
