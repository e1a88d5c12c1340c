"""Exception types shared across the package."""

from __future__ import annotations


class GatekeepError(Exception):
    """Base class for all errors raised by this package."""


class SpecFormatError(GatekeepError):
    """A spec, graph, config or p-value file is malformed (bad schema, bad value)."""


class InvalidSpecError(GatekeepError):
    """A structurally well-formed spec violates one or more constraints.

    Carries the full violation list so callers can report every problem
    at once instead of fixing them one by one.
    """

    def __init__(self, violations):
        self.violations = tuple(violations)
        super().__init__("; ".join(self.violations) or "invalid spec")
