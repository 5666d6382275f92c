import math
from datetime import datetime, timedelta, timezone

import pytest
from hypothesis import given, strategies as st

from perfdrift.errors import DuplicatePoint, InvalidArgument, UnitMismatch
from perfdrift.model import (
    DetectionConfig,
    MeasurementPoint,
    Series,
    Trigger,
    append_point,
    format_timestamp,
    make_series_key,
    parse_timestamp,
    validate_series_key,
)

T0 = datetime(2025, 1, 9, 20, 4, tzinfo=timezone.utc)


def point(commit="cf3c08d", hours=0, value=2500.0, unit="ns"):
    return MeasurementPoint(commit, T0 + timedelta(hours=hours), value, unit)


@pytest.mark.parametrize(
    "args, expected",
    [
        (("MooBench", "Kieker-java-binary-file", {"os": "ubuntu-24.04"}),
         "moobench/kieker-java-binary-file/os=ubuntu-24.04"),
        (("b", "m", {}), "b/m"),
        (("b", "m", {"z": "1", "a": "2"}), "b/m/a=2,z=1"),
    ],
)
def test_make_series_key_examples(args, expected):
    assert make_series_key(*args) == expected


def test_make_series_key_encodes_unsafe_characters():
    key = make_series_key("My Bench", "a/b", {"k=1": "x,y"})
    assert key == "my%20bench/a%2fb/k%3d1=x%2cy"
    assert validate_series_key(key) == key


@pytest.mark.parametrize("benchmark, metric", [("", "m"), ("b", "")])
def test_make_series_key_rejects_empty(benchmark, metric):
    with pytest.raises(InvalidArgument):
        make_series_key(benchmark, metric, {})


@given(st.dictionaries(st.text(min_size=1, max_size=5), st.text(max_size=5), max_size=5))
def test_make_series_key_ignores_tag_insertion_order(env):
    items = list(env.items())
    reordered = dict(reversed(items))
    assert make_series_key("bench", "metric", env) == make_series_key("bench", "metric", reordered)


@given(st.text(min_size=1, max_size=12), st.text(min_size=1, max_size=12))
def test_make_series_key_is_filesystem_safe(benchmark, metric):
    key = make_series_key(benchmark, metric)
    assert set(key) <= set("abcdefghijklmnopqrstuvwxyz0123456789._-%/")
    assert key.count("/") == 1


@pytest.mark.parametrize("key", ["", "a//b", "../x", "a/./b", "A/b", "a b"])
def test_validate_series_key_rejects(key):
    with pytest.raises(InvalidArgument):
        validate_series_key(key)


@pytest.mark.parametrize("commit", ["abc", "CF3C08D", "xyz1234", "a" * 41])
def test_point_rejects_bad_commit(commit):
    with pytest.raises(InvalidArgument):
        point(commit=commit)


@pytest.mark.parametrize("value", [math.nan, math.inf, -1.0])
def test_point_rejects_bad_time_value(value):
    with pytest.raises(InvalidArgument):
        point(value=value)


def test_negative_value_allowed_for_non_time_unit():
    assert point(value=-3.0, unit="ops/s").value == -3.0


def test_point_rejects_empty_unit():
    with pytest.raises(InvalidArgument):
        point(unit="")


def test_timestamp_parsing_normalises_to_utc():
    ts = parse_timestamp("2025-01-09T21:04:00+01:00")
    assert ts == T0
    assert format_timestamp(ts) == "2025-01-09T20:04:00Z"
    assert parse_timestamp("2025-01-09T20:04:00Z") == T0
    assert parse_timestamp("2025-01-09T20:04:00") == T0
    with pytest.raises(InvalidArgument):
        parse_timestamp("yesterday")


def test_trigger_enum():
    p = MeasurementPoint("59d51e3", T0, 1.0, "ns", trigger="schedule")
    assert p.trigger is Trigger.SCHEDULE
    with pytest.raises(ValueError):
        MeasurementPoint("59d51e3", T0, 1.0, "ns", trigger="cron")


def test_append_to_empty_series():
    s = append_point(Series("b/m"), point())
    assert len(s) == 1


def test_append_older_point_is_inserted_before():
    s = append_point(Series("b/m"), point("59d51e3", hours=3))
    s = append_point(s, point("cf3c08d", hours=0))
    assert [p.commit for p in s.points] == ["cf3c08d", "59d51e3"]


def test_append_same_timestamp_orders_by_commit():
    s = append_point(Series("b/m"), point("bbbbbbb"))
    s = append_point(s, point("aaaaaaa"))
    assert [p.commit for p in s.points] == ["aaaaaaa", "bbbbbbb"]


def test_append_duplicate_rejected():
    s = append_point(Series("b/m"), point())
    with pytest.raises(DuplicatePoint):
        append_point(s, point(value=9.0))


def test_append_unit_mismatch():
    s = append_point(Series("b/m"), point())
    with pytest.raises(UnitMismatch):
        append_point(s, point("59d51e3", hours=1, unit="ms"))


def test_series_constructor_checks_order():
    with pytest.raises(InvalidArgument):
        Series("b/m", (point(hours=1), point(hours=0)))


@given(st.permutations(list(range(6))))
def test_append_is_order_insensitive(order):
    pts = [point(f"{0xabc0000 + i:07x}", hours=i % 3, value=float(i)) for i in range(6)]
    s = Series("b/m")
    for i in order:
        s = append_point(s, pts[i])
    expected = sorted(pts, key=lambda p: p.sort_key)
    assert list(s.points) == expected
    for a, b in zip(s.points, s.points[1:]):
        assert a.sort_key < b.sort_key


def test_detection_config_defaults():
    cfg = DetectionConfig()
    assert (cfg.alpha, cfg.p_threshold, cfg.magnitude_threshold) == (1.0, 0.001, 0.05)
    assert (cfg.permutations, cfg.min_segment, cfg.seed) == (999, 5, 0)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"permutations": 100},
        {"permutations": 998},
        {"alpha": 0.0},
        {"alpha": 2.5},
        {"p_threshold": 0.0},
        {"p_threshold": 1.0},
        {"magnitude_threshold": -0.1},
        {"min_segment": 1},
        {"seed": -1},
        {"seed": 2**64},
        {"permutations": 0, "p_threshold": 0.5},
    ],
)
def test_detection_config_rejects(kwargs):
    with pytest.raises(InvalidArgument):
        DetectionConfig(**kwargs)


def test_detection_config_reachability_boundary():
    DetectionConfig(p_threshold=0.001, permutations=999)
    DetectionConfig(p_threshold=0.05, permutations=19)
    with pytest.raises(InvalidArgument):
        DetectionConfig(p_threshold=0.05, permutations=18)
