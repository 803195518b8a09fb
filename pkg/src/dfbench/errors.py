"""Exception types shared across the package.

The CLI maps these onto exit codes: validation-style failures exit 2,
I/O failures exit 3 and invariant violations exit 4.
"""
from __future__ import annotations


class DfbenchError(Exception):
    """Base class for all package errors."""

    code = "error"

    def to_dict(self) -> dict:
        return {"code": self.code, "message": str(self)}


class ValidationError(DfbenchError, ValueError):
    """An input violates a documented precondition or schema rule."""

    code = "validation"

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field

    def to_dict(self) -> dict:
        d = super().to_dict()
        if self.field is not None:
            d["field"] = self.field
        return d


class DomainError(DfbenchError, ValueError):
    """A metric is mathematically undefined for the given inputs."""

    code = "domain"


class CapacityError(DomainError):
    """A mapping does not fit on the target chip."""

    code = "capacity"


class UnitError(ValidationError):
    code = "unit"


class ParseError(DfbenchError, ValueError):
    """Malformed text input, with a 1-based line and column when known."""

    code = "parse"

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        loc = ""
        if line is not None:
            loc = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(loc + message)
        self.line = line
        self.column = column

    def to_dict(self) -> dict:
        d = super().to_dict()
        if self.line is not None:
            d["line"] = self.line
        if self.column is not None:
            d["column"] = self.column
        return d


class TraceError(DfbenchError, ValueError):
    """One or more trace records failed to parse or validate.

    ``issues`` holds every problem found, so nothing is dropped silently.
    """

    code = "trace"

    def __init__(self, issues: list[dict]):
        self.issues = list(issues)
        first = self.issues[0] if self.issues else {"message": "invalid trace"}
        more = f" (+{len(self.issues) - 1} more)" if len(self.issues) > 1 else ""
        line = first.get("line")
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + first["message"] + more)

    def to_dict(self) -> dict:
        return {"code": self.code, "message": str(self), "issues": self.issues}


class InvariantViolation(DfbenchError, AssertionError):
    """An internal consistency check failed; this is a bug, not bad input."""

    code = "invariant"
