"""Exception hierarchy shared by the numerical core and the CLI."""
from __future__ import annotations

from typing import Optional


class StokesletSegmentsError(RuntimeError):
    """Root of every error raised by this package."""

    exit_code = 1


class ConfigError(StokesletSegmentsError):
    """Raised when an experiment configuration cannot be resolved."""

    exit_code = 2


class DegenerateSegmentError(StokesletSegmentsError, ValueError):
    """Raised for zero-length segments or meshes with repeated nodes."""


class UnsupportedIndexError(StokesletSegmentsError, ValueError):
    """Raised when a line integral T_{n,q} outside the supported family is requested."""


class WallViolationError(StokesletSegmentsError, ValueError):
    """Raised when a source segment touches or crosses the wall z = 0."""


class CurvatureDomainError(StokesletSegmentsError, ValueError):
    """Raised when the target curvature square root would be imaginary."""


class BlowUpError(StokesletSegmentsError):
    """Raised when a node speed exceeds the configured bound."""

    exit_code = 3

    def __init__(self, message: str, *, time: float, max_speed: float) -> None:
        super().__init__(message)
        self.time = time
        self.max_speed = max_speed


class FrameDegeneracyError(StokesletSegmentsError):
    """Raised when rod frames drift too far from orthonormal in one step."""

    exit_code = 3


class IllConditionedSystemError(StokesletSegmentsError):
    """Raised when the mobility system cannot be solved reliably."""

    exit_code = 4

    def __init__(self, message: str, *, condition: Optional[float] = None) -> None:
        if condition is not None:
            message = f"{message} (condition estimate {condition:.3e})"
        super().__init__(message)
        self.condition = condition
