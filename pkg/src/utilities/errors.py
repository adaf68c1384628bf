"""
Exception hierarchy shared by every package.

Each operation raises the narrowest subclass; the CLI catches the root
``TargetingException`` and turns it into an exit status.
"""
from __future__ import annotations

try:
    from enum import StrEnum
except ImportError:  # Python < 3.11
    from enum import Enum

    class StrEnum(str, Enum):
        __str__ = str.__str__
from typing import Optional


class TargetingException(Exception):
    """ Root exception for this library """

    code: str = "TARGETING_ERROR"


class InvalidInputError(TargetingException):
    """ Data handed to an operation violates its preconditions """

    code = "INVALID_INPUT"


class InvalidConfigError(TargetingException):
    """ A parameter or configuration entry is unusable """

    code = "INVALID_CONFIG"

    def __init__(self, message: str, line: Optional[int] = None) -> None:
        self.message = message
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class NumericalFailureError(TargetingException):
    """ A numerical routine produced a non-finite quantity """

    code = "NUMERICAL_FAILURE"


class UndefinedMetricError(TargetingException):
    """ A metric or diagnostic is undefined at the given input """

    code = "UNDEFINED_METRIC"


class IngestErrorCode(StrEnum):
    FILE_NOT_FOUND = "FILE_NOT_FOUND"
    EMPTY_FILE = "EMPTY_FILE"
    MISSING_COLUMN = "MISSING_COLUMN"
    MALFORMED_NUMERIC = "MALFORMED_NUMERIC"
    NONPOSITIVE_SIGMA = "NONPOSITIVE_SIGMA"
    DUPLICATE_ID = "DUPLICATE_ID"


class PanelIngestError(TargetingException):
    """ A panel file could not be turned into a NoisyPanel """

    def __init__(self, code: IngestErrorCode, message: str, rows: Optional[list[int]] = None) -> None:
        self.code = code
        self.rows = rows or []
        super().__init__(message)
