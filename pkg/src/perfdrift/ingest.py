"""Parsers for benchmark result files."""

from __future__ import annotations

import csv
import io
import json
import math
import re
import statistics
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable

from .errors import InvalidArgument, ParseError, SchemaError, ValueParseError


class ResultFormat(str, Enum):
    GHA_JSON = "gha_json"
    MOOBENCH_CSV = "moobench_csv"


@dataclass(frozen=True)
class ResultEntry:
    name: str
    unit: str
    value: float
    extra: str | None = None


@dataclass(frozen=True)
class BenchmarkResultFile:
    format: ResultFormat
    entries: tuple[ResultEntry, ...]


AGGREGATORS: dict[str, Callable[[Iterable[float]], float]] = {
    "mean": statistics.fmean,
    "median": statistics.median,
    "min": min,
}

_DECIMAL_RE = re.compile(r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?")


def _decode(data: bytes | str) -> str:
    if isinstance(data, str):
        return data
    try:
        return data.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise ParseError(f"input is not valid UTF-8: {exc.reason}", offset=exc.start) from exc


def _reject_constant(token: str) -> float:
    raise ValueParseError(f"non-finite number {token!r} is not allowed")


def parse_gha_entries(items: object) -> tuple[ResultEntry, ...]:
    """Validate an already-decoded github-action-benchmark result array."""
    if not isinstance(items, list):
        raise SchemaError("result document must be an array of objects")
    if not items:
        raise SchemaError("result array is empty")
    entries = []
    for index, item in enumerate(items):
        if not isinstance(item, dict):
            raise SchemaError(f"element {index} is not an object", index=index)
        for name in ("name", "unit", "value"):
            if name not in item:
                raise SchemaError(f"element {index} is missing required field {name!r}", field=name, index=index)
        for name in ("name", "unit"):
            if not isinstance(item[name], str) or not item[name]:
                raise SchemaError(f"field {name!r} of element {index} must be a non-empty string",
                                  field=name, index=index)
        value = item["value"]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise SchemaError(f"field 'value' of element {index} must be a number", field="value", index=index)
        if not math.isfinite(value):
            raise ValueParseError(f"field 'value' of element {index} is not finite", row=index)
        extra = item.get("extra")
        if extra is not None and not isinstance(extra, str):
            raise SchemaError(f"field 'extra' of element {index} must be a string", field="extra", index=index)
        entries.append(ResultEntry(item["name"], item["unit"], float(value), extra))
    return tuple(entries)


def parse_gha_json(data: bytes | str) -> BenchmarkResultFile:
    """Parse a github-action-benchmark result array (``name``/``unit``/``value``/``extra``)."""
    text = _decode(data)
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        offset = len(text[:exc.pos].encode("utf-8"))
        raise ParseError(f"malformed JSON: {exc.msg}", offset=offset) from exc
    except RecursionError as exc:
        raise ParseError("JSON document nested too deeply") from exc
    return BenchmarkResultFile(ResultFormat.GHA_JSON, parse_gha_entries(doc))


def parse_moobench_csv(data: bytes | str, column: str = "duration_ns", name: str = "moobench") -> BenchmarkResultFile:
    """Parse a header-bearing CSV of durations in nanoseconds.

    Rows are numbered as file lines (the header is row 1). Only ``.`` is
    accepted as decimal separator.
    """
    text = _decode(data)
    if not text.strip():
        raise ParseError("empty CSV input", offset=0)
    try:
        rows = list(csv.reader(io.StringIO(text, newline="")))
    except csv.Error as exc:
        raise ParseError(f"malformed CSV: {exc}") from exc
    header = [h.strip() for h in rows[0]]
    if column not in header:
        raise SchemaError(f"CSV header has no column {column!r}", field=column)
    col = header.index(column)
    entries = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if col >= len(row):
            raise ValueParseError(f"row {lineno}: missing value for column {column!r}", row=lineno)
        cell = row[col].strip()
        if not _DECIMAL_RE.fullmatch(cell):
            raise ValueParseError(f"row {lineno}: cannot parse {cell!r} as a number", row=lineno)
        value = float(cell)
        if not math.isfinite(value):
            raise ValueParseError(f"row {lineno}: value {cell!r} is not finite", row=lineno)
        entries.append(ResultEntry(name, "ns", value))
    if not entries:
        raise SchemaError("CSV contains a header but no data rows")
    return BenchmarkResultFile(ResultFormat.MOOBENCH_CSV, tuple(entries))


def aggregate_entries(result: BenchmarkResultFile, aggregate: str = "mean") -> list[ResultEntry]:
    """Collapse entries sharing a name into one, keeping first-seen order."""
    try:
        func = AGGREGATORS[aggregate]
    except KeyError:
        raise InvalidArgument(f"unknown aggregator {aggregate!r}; choose from {sorted(AGGREGATORS)}") from None
    groups: dict[str, list[ResultEntry]] = {}
    for entry in result.entries:
        groups.setdefault(entry.name, []).append(entry)
    out = []
    for name, group in groups.items():
        units = {e.unit for e in group}
        if len(units) > 1:
            raise SchemaError(f"benchmark {name!r} reports mixed units {sorted(units)}", field="unit")
        out.append(ResultEntry(name, group[0].unit, float(func(e.value for e in group)), group[0].extra))
    return out
