"""Exception hierarchy shared by every perfdrift module."""

from __future__ import annotations


class PerfDriftError(Exception):
    """Base class; ``code`` is the stable machine-readable error kind."""

    code = "error"


class InvalidArgument(PerfDriftError, ValueError):
    code = "invalid-argument"


class DuplicatePoint(PerfDriftError):
    code = "duplicate-point"


class UnitMismatch(PerfDriftError):
    code = "unit-mismatch"


class TooShort(PerfDriftError, ValueError):
    code = "too-short"


class InvalidSeries(PerfDriftError, ValueError):
    code = "invalid-series"


class ParseError(PerfDriftError):
    code = "parse-error"

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message if offset is None else f"{message} (byte offset {offset})")
        self.offset = offset


class SchemaError(PerfDriftError):
    code = "schema-error"

    def __init__(self, message: str, field: str | None = None, index: int | None = None):
        super().__init__(message)
        self.field = field
        self.index = index


class ValueParseError(PerfDriftError):
    code = "value-error"

    def __init__(self, message: str, row: int | None = None):
        super().__init__(message)
        self.row = row


class StorageError(PerfDriftError):
    code = "storage-error"


class LoadError(PerfDriftError):
    code = "load-error"

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class UnsupportedSize(PerfDriftError, ValueError):
    code = "unsupported-size"


class DegenerateSample(PerfDriftError, ValueError):
    code = "degenerate-sample"


class UnpairedInput(PerfDriftError, ValueError):
    code = "unpaired-input"


class DegenerateDifference(PerfDriftError, ValueError):
    code = "degenerate-difference"
