"""Exception taxonomy shared by every module in the package.

All refusals carry a human-readable message; cap violations additionally
name the constraint that failed so callers (and the CLI error JSON) can
report it without parsing prose.
"""

from __future__ import annotations


class ToolkitError(Exception):
    """Base class for every error raised deliberately by this package."""


class ValidationError(ToolkitError, ValueError):
    """Input data or arguments violate a documented precondition."""


class FormatError(ToolkitError, ValueError):
    """A file (CSV, JSON, DOT, DIMACS) does not match its documented format."""


class CapExceededError(ToolkitError):
    """A size cap was exceeded; ``constraint`` names the violated limit."""

    def __init__(self, message: str, constraint: str):
        super().__init__(message)
        self.constraint = constraint


class NumericsError(ToolkitError):
    """An internal numerical invariant failed (for example an entropy sum
    came out more negative than float round-off can explain)."""


class MultiSinkError(ToolkitError):
    """A charge audit was asked to run on a polytree with a multi-sink
    component; the audit refuses rather than rewiring the structure."""
