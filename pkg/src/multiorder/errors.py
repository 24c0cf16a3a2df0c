"""Exception and warning types shared across the package."""

from __future__ import annotations


class MultiorderError(Exception):
    """Base class for all errors raised by this package."""


# --- coalition / game layer ---------------------------------------------

class InvalidPlayer(MultiorderError):
    """A player id is out of range or a pair is not distinct."""


class PlayerInCoalition(MultiorderError):
    """A pair member was found inside the context coalition."""


class SizeLimit(MultiorderError):
    """A game variant was requested beyond its supported player count."""


class EvaluatorFailure(MultiorderError):
    """An underlying evaluator raised; carries the offending coalitions."""

    def __init__(self, message: str, coalitions=()):
        super().__init__(message)
        self.coalitions = tuple(coalitions)


# --- engine ---------------------------------------------------------------

class ExactSizeLimit(MultiorderError):
    """Exact enumeration would exceed the configured budget."""


class DegenerateOrder(MultiorderError):
    """No context of the requested order exists."""


class IncompleteProfile(MultiorderError):
    """An operation required estimates at every order 0..n-2."""


# --- metrics --------------------------------------------------------------

class MissingOrder(MultiorderError):
    """A requested order is absent from one or more records."""


class AllZeroStrength(MultiorderError):
    """Every recorded order has zero interaction strength."""


class OrderGridMismatch(MultiorderError):
    """Two profiles do not share the same order grid."""


class GridMismatch(MultiorderError):
    """Two record sets do not share the same order grid or player count."""


class DeltasNotRetained(MultiorderError):
    """Per-context deltas were not retained but are required."""


class ZeroStrength(MultiorderError):
    """Interaction strength is zero at the requested order."""


class DegenerateGame(MultiorderError):
    """v(N) equals v(empty) so normalization is undefined."""


class ZeroDenominatorWarning(UserWarning):
    """A degenerate denominator was replaced by its documented convention."""


# --- image game -----------------------------------------------------------

class BadGrid(MultiorderError):
    """Grid size incompatible with the spatial dimensions."""


class ShapeMismatch(MultiorderError):
    """A tensor does not have the expected shape."""


class ScorerFailure(MultiorderError):
    """An underlying model scorer raised."""


# --- bridge ---------------------------------------------------------------

class BridgeError(MultiorderError):
    """Base class for wire-protocol errors."""


class HandshakeMismatch(BridgeError):
    """Remote endpoint disagrees on player count or protocol version."""


class BridgeTimeout(BridgeError):
    """No response arrived within the configured timeout."""


class RemoteError(BridgeError):
    """The remote endpoint reported an error or dropped the session."""


class BindFailure(BridgeError):
    """A server endpoint could not be bound."""


# --- CLI / archives -------------------------------------------------------

class ConfigError(MultiorderError):
    """A run configuration failed validation; carries the field path."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


class ArchiveError(MultiorderError):
    """An archive on disk is missing, partial, or has an unknown schema."""
