"""Error types shared across the package.

Every error carries a stable machine-readable ``code`` so the service layer
can map failures to API error responses without string matching.
"""

from __future__ import annotations

from typing import Any


class TrainforgeError(Exception):
    """Base error with a stable machine code and optional context fields."""

    def __init__(self, code: str, message: str, **context: Any):
        super().__init__(message)
        self.code = code
        self.message = message
        self.context = context

    def __str__(self) -> str:
        if self.context:
            detail = ", ".join(f"{k}={v!r}" for k, v in sorted(self.context.items()))
            return f"[{self.code}] {self.message} ({detail})"
        return f"[{self.code}] {self.message}"


class DomainError(TrainforgeError):
    """A domain value violates one of its invariants."""


class MetricError(TrainforgeError):
    """A metric computation received inputs outside its domain."""


class ProtocolError(TrainforgeError):
    """An event stream violates the session protocol (seq, time, kind)."""


class StoreError(TrainforgeError):
    """Persistence failure: missing sessions, conflicts, corrupt files."""
