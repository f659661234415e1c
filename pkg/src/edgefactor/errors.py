"""Exception types and the per-record diagnostic record shared by loaders."""

from __future__ import annotations

from dataclasses import dataclass


class EdgeFactorError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(EdgeFactorError):
    """Input data violates a structural contract (fatal for the run)."""


@dataclass(frozen=True)
class Diagnostic:
    source: str
    line: int | None
    message: str

    def __str__(self) -> str:
        where = self.source if self.line is None else f"{self.source}:{self.line}"
        return f"{where}: {self.message}"
