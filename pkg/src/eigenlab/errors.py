"""Exception types shared across the package.

Each maps to a CLI exit code: UsageError -> 2, CheckFailure -> 3,
ResourceLimitError -> 4. ConvergenceError carries the last refinement
values so a caller can inspect how far the quadrature got.
"""

from __future__ import annotations


class EigenlabError(Exception):
    """Base class for package errors."""


class UsageError(EigenlabError):
    """Invalid argument, configuration, or manifold mismatch."""

    exit_code = 2


class ConvergenceError(EigenlabError):
    """A refinement loop ran out of levels before reaching tolerance."""

    exit_code = 3

    def __init__(self, message: str, history: list[tuple[float, float]] | None = None):
        super().__init__(message)
        # (resolution parameter, value) pairs, coarsest first
        self.history = history or []


class CheckFailure(EigenlabError):
    """A verification (inequality/fit) failed; data may still be valid."""

    exit_code = 3


class ResourceLimitError(EigenlabError):
    """A requested computation exceeds the configured node/size cap."""

    exit_code = 4

    def __init__(self, message: str, requested: int | None = None, cap: int | None = None):
        super().__init__(message)
        self.requested = requested
        self.cap = cap
