"""Errors shared across the pipeline. Every error carries a stable machine code."""

from __future__ import annotations


class AutoStoryError(Exception):
    """Base error: a stable code, a human message, and an optional offending path."""

    def __init__(self, code: str, message: str, *, path: str | None = None):
        super().__init__(message)
        self.code = code
        self.path = path

    def to_payload(self) -> dict:
        return {"code": self.code, "path": self.path, "message": str(self)}

    def __repr__(self) -> str:  # pragma: no cover
        return f"{type(self).__name__}({self.code!r}, {str(self)!r}, path={self.path!r})"


class LayoutParseError(AutoStoryError):
    """Layout document rejected. Carries the 1-based position of the first error.

    `violation` is set when the document was grammatically well formed but a
    field value broke a layout invariant (for example BOX_OUT_OF_RANGE); callers
    use it to distinguish malformed text from invalid-but-parseable layouts.
    """

    def __init__(
        self,
        message: str,
        *,
        line: int = 1,
        col: int = 1,
        path: str | None = None,
        violation: str | None = None,
    ):
        super().__init__("PARSE_FAILED", f"{message} (line {line}, char {col})", path=path)
        self.line = line
        self.col = col
        self.violation = violation


class ValidationFailedError(AutoStoryError):
    """A layout or edit failed validation; carries the full violation report."""

    def __init__(self, report, message: str | None = None, *, path: str | None = None):
        first = report.violations[0] if report.violations else None
        msg = message or (f"{first.code} at {first.path}: {first.message}" if first else "validation failed")
        super().__init__("VALIDATION_FAILED", msg, path=path or (first.path if first else None))
        self.report = report
