"""Append-only on-disk series store.

Each series key maps to ``<root>/<key>.jsonl``; every line is one JSON record
with the fields ``commit``, ``env``, ``trigger``, ``ts``, ``unit``, ``value``.
A trailing line without a newline is an interrupted write and is ignored.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path

from .errors import InvalidArgument, LoadError, PerfDriftError, StorageError
from .model import MeasurementPoint, Series, format_timestamp, validate_series_key

logger = logging.getLogger(__name__)

RECORD_FIELDS = ("commit", "env", "trigger", "ts", "unit", "value")
SUFFIX = ".jsonl"


@dataclass(frozen=True)
class StoreLayout:
    root: Path
    fsync: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "root", Path(self.root))

    def path_for(self, key: str) -> Path:
        *dirs, leaf = validate_series_key(key).split("/")
        return self.root.joinpath(*dirs, leaf + SUFFIX)

    def keys(self) -> list[str]:
        if not self.root.is_dir():
            return []
        found = []
        for path in self.root.rglob("*" + SUFFIX):
            rel = path.relative_to(self.root).as_posix()
            found.append(rel[: -len(SUFFIX)])
        return sorted(found)


def point_to_record(point: MeasurementPoint) -> dict:
    return {
        "commit": point.commit,
        "env": dict(point.env),
        "trigger": point.trigger.value,
        "ts": format_timestamp(point.timestamp),
        "unit": point.unit,
        "value": point.value,
    }


def record_to_point(record: object) -> MeasurementPoint:
    if not isinstance(record, dict):
        raise InvalidArgument("record is not an object")
    missing = [f for f in RECORD_FIELDS if f not in record and f != "env"]
    if missing:
        raise InvalidArgument(f"record is missing field(s) {', '.join(missing)}")
    env = record.get("env", {})
    if not isinstance(env, dict) or not all(isinstance(v, str) for v in env.values()):
        raise InvalidArgument("record field 'env' must map strings to strings")
    if not isinstance(record["ts"], str):
        raise InvalidArgument("record field 'ts' must be a string")
    return MeasurementPoint(
        commit=record["commit"],
        timestamp=record["ts"],
        value=record["value"],
        unit=record["unit"],
        env=env,
        trigger=record["trigger"],
    )


def encode_record(point: MeasurementPoint) -> bytes:
    return (json.dumps(point_to_record(point), sort_keys=True, ensure_ascii=False) + "\n").encode("utf-8")


def store_append(layout: StoreLayout, key: str, point: MeasurementPoint) -> None:
    """Append one record for ``point`` to the file of ``key``."""
    path = layout.path_for(key)
    if not layout.root.is_dir():
        raise StorageError(f"store root {layout.root} is not a directory")
    line = encode_record(point)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "a+b") as fh:
            size = fh.seek(0, os.SEEK_END)
            if size:
                fh.seek(size - 1)
                if fh.read(1) != b"\n":
                    _drop_partial_tail(fh, path, size)
            fh.write(line)
            fh.flush()
            if layout.fsync:
                os.fsync(fh.fileno())
    except OSError as exc:
        raise StorageError(f"cannot append to {path}: {exc}") from exc


def _drop_partial_tail(fh, path: Path, size: int) -> None:
    fh.seek(0)
    data = fh.read()
    keep = data.rfind(b"\n") + 1
    logger.warning("%s: discarding %d bytes of an interrupted record", path, size - keep)
    fh.truncate(keep)
    fh.seek(keep)


def parse_records(data: bytes, key: str, source: str = "<store>") -> Series:
    """Build a series from raw record-file bytes."""
    lines = data.split(b"\n")
    if lines[-1]:
        logger.warning("%s: ignoring trailing partial record (%d bytes)", source, len(lines[-1]))
    points: list[tuple[MeasurementPoint, int]] = []
    for lineno, raw in enumerate(lines[:-1], start=1):
        if not raw.strip():
            continue
        try:
            point = record_to_point(json.loads(raw.decode("utf-8")))
        except (UnicodeDecodeError, json.JSONDecodeError, PerfDriftError) as exc:
            raise LoadError(f"{source}: corrupt record: {exc}", line=lineno) from exc
        points.append((point, lineno))

    ordered = sorted(points, key=lambda item: (item[0].sort_key, item[1]))
    kept: list[MeasurementPoint] = []
    for point, lineno in ordered:
        if kept and kept[-1].sort_key == point.sort_key:
            logger.warning("%s line %d: duplicate-point for commit %s at %s dropped",
                           source, lineno, point.commit, format_timestamp(point.timestamp))
            continue
        if kept and point.unit != kept[0].unit:
            raise LoadError(f"{source}: unit {point.unit!r} differs from series unit {kept[0].unit!r}", line=lineno)
        kept.append(point)
    return Series(key, tuple(kept))


def store_load(layout: StoreLayout, key: str) -> Series:
    """Load the series for ``key``; a missing file is an empty series."""
    path = layout.path_for(key)
    try:
        data = path.read_bytes()
    except FileNotFoundError:
        return Series(key)
    except OSError as exc:
        raise StorageError(f"cannot read {path}: {exc}") from exc
    return parse_records(data, key, source=str(path))
