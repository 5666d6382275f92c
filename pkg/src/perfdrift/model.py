"""Domain types shared by detection, storage, statistics and reporting."""

from __future__ import annotations

import bisect
import math
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import Mapping

from .errors import DuplicatePoint, InvalidArgument, UnitMismatch

COMMIT_RE = re.compile(r"[0-9a-f]{7,40}")
TIME_UNITS = frozenset({"ns", "us", "ms", "s"})
MAX_SEED = 2**64 - 1

_KEY_SAFE = frozenset("abcdefghijklmnopqrstuvwxyz0123456789._-")
_KEY_COMPONENT_RE = re.compile(r"[a-z0-9._%=,-]+")


class Trigger(str, Enum):
    PUSH = "push"
    SCHEDULE = "schedule"
    MANUAL = "manual"


def parse_timestamp(text: str) -> datetime:
    """Parse an ISO 8601 instant into an aware UTC datetime.

    Naive inputs are taken to be UTC already. ``"now"`` is not handled here;
    callers expand it before storage.
    """
    raw = text.strip()
    if raw.endswith(("Z", "z")):
        raw = raw[:-1] + "+00:00"
    try:
        ts = datetime.fromisoformat(raw)
    except ValueError as exc:
        raise InvalidArgument(f"not an ISO 8601 timestamp: {text!r}") from exc
    if ts.tzinfo is None:
        return ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def format_timestamp(ts: datetime) -> str:
    ts = ts.astimezone(timezone.utc)
    spec = "seconds" if ts.microsecond == 0 else "microseconds"
    return ts.replace(tzinfo=None).isoformat(timespec=spec) + "Z"


@dataclass(frozen=True)
class MeasurementPoint:
    """One benchmark result for one commit and CI run."""

    commit: str
    timestamp: datetime
    value: float
    unit: str
    env: Mapping[str, str] = field(default_factory=dict)
    trigger: Trigger = Trigger.PUSH

    def __post_init__(self) -> None:
        if not isinstance(self.commit, str) or not COMMIT_RE.fullmatch(self.commit):
            raise InvalidArgument(f"commit must be 7-40 lowercase hex chars, got {self.commit!r}")
        if isinstance(self.timestamp, str):
            object.__setattr__(self, "timestamp", parse_timestamp(self.timestamp))
        elif not isinstance(self.timestamp, datetime):
            raise InvalidArgument("timestamp must be a datetime or ISO 8601 string")
        elif self.timestamp.tzinfo is None:
            object.__setattr__(self, "timestamp", self.timestamp.replace(tzinfo=timezone.utc))
        else:
            object.__setattr__(self, "timestamp", self.timestamp.astimezone(timezone.utc))
        if isinstance(self.value, bool) or not isinstance(self.value, (int, float)):
            raise InvalidArgument(f"value must be a real number, got {self.value!r}")
        value = float(self.value)
        if not math.isfinite(value):
            raise InvalidArgument(f"value must be finite, got {value!r}")
        if not self.unit:
            raise InvalidArgument("unit must be non-empty")
        if self.unit in TIME_UNITS and value < 0:
            raise InvalidArgument(f"time value must be non-negative, got {value!r}")
        object.__setattr__(self, "value", value)
        try:
            object.__setattr__(self, "trigger", Trigger(self.trigger))
        except ValueError:
            raise InvalidArgument(f"trigger must be one of push, schedule, manual; got {self.trigger!r}") from None
        env = dict(sorted((str(k), str(v)) for k, v in dict(self.env).items()))
        object.__setattr__(self, "env", env)

    @property
    def sort_key(self) -> tuple[datetime, str]:
        return (self.timestamp, self.commit)

    def __hash__(self) -> int:
        return hash((self.commit, self.timestamp, self.value, self.unit,
                     tuple(self.env.items()), self.trigger))


@dataclass(frozen=True)
class Series:
    """Points for one series key, kept sorted by (timestamp, commit)."""

    key: str
    points: tuple[MeasurementPoint, ...] = ()

    def __post_init__(self) -> None:
        points = tuple(self.points)
        object.__setattr__(self, "points", points)
        for prev, cur in zip(points, points[1:]):
            if not prev.sort_key < cur.sort_key:
                raise InvalidArgument("series points must be strictly ordered by (timestamp, commit)")
        if points and any(p.unit != points[0].unit for p in points):
            raise UnitMismatch("all points of a series must share one unit")

    def __len__(self) -> int:
        return len(self.points)

    @property
    def unit(self) -> str | None:
        return self.points[0].unit if self.points else None

    @property
    def values(self) -> list[float]:
        return [p.value for p in self.points]


@dataclass(frozen=True)
class ChangePoint:
    index: int
    before_commit: str
    after_commit: str
    qhat: float
    p_value: float
    magnitude: float

    def to_dict(self) -> dict:
        magnitude = self.magnitude if math.isfinite(self.magnitude) else None
        return {
            "index": self.index,
            "before_commit": self.before_commit,
            "after_commit": self.after_commit,
            "qhat": self.qhat,
            "p_value": self.p_value,
            "magnitude": magnitude,
        }


@dataclass(frozen=True)
class DetectionConfig:
    alpha: float = 1.0
    p_threshold: float = 0.001
    magnitude_threshold: float = 0.05
    permutations: int = 999
    min_segment: int = 5
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha <= 2.0:
            raise InvalidArgument(f"alpha must be in (0, 2], got {self.alpha}")
        if not 0.0 < self.p_threshold < 1.0:
            raise InvalidArgument(f"p_threshold must be in (0, 1), got {self.p_threshold}")
        if not (self.magnitude_threshold >= 0.0 and math.isfinite(self.magnitude_threshold)):
            raise InvalidArgument(f"magnitude_threshold must be >= 0, got {self.magnitude_threshold}")
        if int(self.permutations) != self.permutations or self.permutations < 1:
            raise InvalidArgument(f"permutations must be a positive integer, got {self.permutations}")
        # smallest attainable permutation p-value is 1/(R+1)
        if 1.0 / (self.permutations + 1) > self.p_threshold:
            needed = math.ceil(1.0 / self.p_threshold) - 1
            raise InvalidArgument(
                f"permutations={self.permutations} can never reach p <= {self.p_threshold}; "
                f"use at least {needed}"
            )
        if int(self.min_segment) != self.min_segment or self.min_segment < 2:
            raise InvalidArgument(f"min_segment must be an integer >= 2, got {self.min_segment}")
        if int(self.seed) != self.seed or not 0 <= self.seed <= MAX_SEED:
            raise InvalidArgument(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "p_threshold": self.p_threshold,
            "magnitude_threshold": self.magnitude_threshold,
            "permutations": self.permutations,
            "min_segment": self.min_segment,
            "seed": self.seed,
        }


class StatTest(str, Enum):
    SHAPIRO_WILK = "shapiro_wilk"
    PAIRED_T = "paired_t"
    WELCH_T = "welch_t"


@dataclass(frozen=True)
class StatTestResult:
    test: StatTest
    statistic: float
    p_value: float
    n: tuple[int, ...]
    df: float | None = None
    significant: bool | None = None
    degenerate: bool = False


def _encode_component(text: str) -> str:
    out = []
    for ch in text.lower():
        if ch in _KEY_SAFE:
            out.append(ch)
        else:
            out.extend(f"%{b:02x}" for b in ch.encode("utf-8"))
    return "".join(out)


def make_series_key(benchmark: str, metric: str, env: Mapping[str, str] | None = None) -> str:
    """Canonical, filesystem-safe key for a (benchmark, metric, env) triple.

    >>> make_series_key("MooBench", "Kieker-java-binary-file", {"os": "ubuntu-24.04"})
    'moobench/kieker-java-binary-file/os=ubuntu-24.04'
    """
    if not benchmark or not metric:
        raise InvalidArgument("benchmark and metric must be non-empty")
    parts = [_encode_component(benchmark), _encode_component(metric)]
    if env:
        tags = sorted((_encode_component(k), _encode_component(v)) for k, v in env.items())
        parts.append(",".join(f"{k}={v}" for k, v in tags))
    return "/".join(parts)


def validate_series_key(key: str) -> str:
    """Reject keys that could escape a store root or are not canonical."""
    components = key.split("/")
    if not key or any(c in ("", ".", "..") or not _KEY_COMPONENT_RE.fullmatch(c) for c in components):
        raise InvalidArgument(f"invalid series key {key!r}")
    return key


def append_point(series: Series, point: MeasurementPoint) -> Series:
    """Return a new series with ``point`` inserted in (timestamp, commit) order."""
    if series.points and point.unit != series.unit:
        raise UnitMismatch(f"point unit {point.unit!r} does not match series unit {series.unit!r}")
    keys = [p.sort_key for p in series.points]
    pos = bisect.bisect_left(keys, point.sort_key)
    if pos < len(keys) and keys[pos] == point.sort_key:
        raise DuplicatePoint(
            f"duplicate point for commit {point.commit} at {format_timestamp(point.timestamp)}"
        )
    points = series.points[:pos] + (point,) + series.points[pos:]
    return Series(series.key, points)
