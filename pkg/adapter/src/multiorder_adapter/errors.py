"""Exception types shared across the adapter."""

from __future__ import annotations


class AdapterError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(AdapterError):
    """A configuration failed validation; carries the field path."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


class ShapeMismatch(AdapterError):
    """A tensor does not have the expected shape."""


class BadGrid(AdapterError):
    """Grid size incompatible with the spatial dimensions."""


class BadMask(AdapterError):
    """A wire mask does not parse for the served player count."""


class ModelLoadFailure(AdapterError):
    """The configured model could not be constructed."""


class BindFailure(AdapterError):
    """A server endpoint could not be bound."""
