"""Exception hierarchy shared by every csisense module."""

from __future__ import annotations


class CsiSenseError(Exception):
    """Base class for all csisense errors."""


class ParameterError(CsiSenseError, ValueError):
    """An argument violates a documented precondition."""


class SegmentParseError(CsiSenseError, ValueError):
    """A segment file is malformed.

    ``line`` is the 1-based line number in the file (the header is line 1),
    or ``None`` when the problem is not tied to a single line.
    """

    def __init__(self, message: str, line: int | None = None, path=None):
        self.line = line
        self.path = path
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        prefix = ":".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class UnparseableAnswerError(CsiSenseError, ValueError):
    """A model reply did not contain any activity label."""

    def __init__(self, raw: str):
        self.raw = raw
        super().__init__(f"no activity label found in answer {raw!r}")


class GatewayError(CsiSenseError):
    """Base class for chat backend failures."""


class AuthenticationError(GatewayError):
    """The backend rejected the credentials. Never retried."""


class RetriesExhaustedError(GatewayError):
    """Every attempt failed with a transient error or timed out."""

    def __init__(self, message: str, attempts: int):
        self.attempts = attempts
        super().__init__(message)


class MalformedResponseError(GatewayError):
    """The backend answered, but the body is not a usable chat completion."""
