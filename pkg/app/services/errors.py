"""Exception hierarchy shared by the toolkit services."""
from __future__ import annotations

from typing import Optional


class ToolkitError(ValueError):
    """Base class for every error raised by the toolkit services."""


class DimensionError(ToolkitError):
    pass


class UnstableSpectrumError(ToolkitError):
    pass


class SingularSystemError(ToolkitError):
    pass


class QuadratureError(ToolkitError):
    pass


class UnsupportedDecompositionError(ToolkitError):
    pass


class MomentUnavailableError(ToolkitError):
    pass


class OffGridLagError(ToolkitError):
    pass


class LagTooLargeError(ToolkitError):
    pass


class SimulationError(ToolkitError):
    pass


class BurnInExceededError(SimulationError):
    pass


class InsufficientDataError(ToolkitError):
    pass


class ReplicationError(ToolkitError):
    """A single Monte-Carlo replication failed."""

    def __init__(self, message: str, *, stream_index: int) -> None:
        super().__init__(f"replication {stream_index}: {message}")
        self.stream_index = stream_index


class ConfigError(ToolkitError):
    """Invalid experiment configuration, located by field path or source line."""

    def __init__(self, message: str, *, field: Optional[str] = None, line: Optional[int] = None) -> None:
        location = []
        if line is not None:
            location.append(f"line {line}")
        if field:
            location.append(f"field '{field}'")
        prefix = f"{', '.join(location)}: " if location else ""
        super().__init__(prefix + message)
        self.field = field
        self.line = line
