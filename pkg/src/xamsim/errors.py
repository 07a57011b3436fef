"""Simulator exception types."""


class SimError(Exception):
    """Base class for simulator errors."""


class AddressError(SimError):
    """Out-of-range or misaligned address/coordinate."""


class ModeError(SimError):
    """Operation issued against the wrong sensing or port mode."""


class MarginError(SimError):
    """No valid sensing window for the given device parameters."""


class CapacityError(SimError):
    """Allocation or placement exceeds available capacity."""


class ConfigError(SimError):
    """Malformed configuration input."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class EstimationError(SimError):
    """Lifetime estimation cannot proceed (e.g. no recorded epochs)."""


class TraceError(SimError):
    """Malformed trace input or timing-constraint violation."""
