"""Exception hierarchy shared by every layer of the toolkit."""

from __future__ import annotations


class MbrrmError(Exception):
    """Base class for all toolkit errors."""


class ParseError(MbrrmError, ValueError):
    """A document could not be parsed at all (bad JSON, bad CSV)."""


class ValidationError(MbrrmError, ValueError):
    """Input parsed but violates a model invariant.

    ``field`` names the offending field so command-line users can fix it.
    """

    def __init__(self, field: str, message: str) -> None:
        super().__init__(f"{field}: {message}")
        self.field = field


class GuardRailError(MbrrmError):
    """An exhaustive or enumerative routine refused an oversized instance."""


class SingularChannelError(MbrrmError, ValueError):
    """Unregularized precoding requested on a rank-deficient channel."""
