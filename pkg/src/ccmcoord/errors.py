"""Exception types shared across the package."""

from __future__ import annotations


class InvalidInputError(ValueError):
    """Raised when an argument violates an operation's preconditions.

    ``field`` optionally names the offending attribute so that configuration
    loaders can report a dotted path such as ``shaping.theta``.
    """

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class GenerationError(RuntimeError):
    """Raised when a synthetic generator leaves its valid state region."""


class ConfigError(InvalidInputError):
    """Configuration file could not be parsed or violates a constraint."""
