"""Shared exception types."""

from __future__ import annotations


class CodevetError(Exception):
    """Base class for all codevet errors."""


class CompilerNotFound(CodevetError):
    """The configured compiler command does not resolve to an executable."""


class IoFailure(CodevetError):
    """Filesystem operation failed while driving the compiler."""


class ParseFailure(CodevetError):
    """The source could not be parsed into a syntax tree."""


class SpanMismatch(CodevetError):
    """A mutation record does not correspond to the given mutated source."""


class NoCodeFound(CodevetError):
    """A fixer reply contained no extractable code candidate."""


class NoErrorDiagnostic(CodevetError):
    """An operation required an Error-severity diagnostic but none exists."""


class FixerError(CodevetError):
    """A fixer backend failed hard (transport error, timeout)."""


class BackendUnreachable(CodevetError):
    """The model HTTP backend could not be reached."""


class BackendMalformedReply(CodevetError):
    """The model HTTP backend returned a reply we cannot interpret."""

    def __init__(self, raw: str, message: str = "malformed backend reply"):
        super().__init__(f"{message}: {raw[:200]!r}")
        self.raw = raw
