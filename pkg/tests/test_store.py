import json
import logging
import os
import random
from datetime import datetime, timedelta, timezone

import pytest
from hypothesis import given, settings, strategies as st

from perfdrift.errors import InvalidArgument, LoadError, StorageError
from perfdrift.model import MeasurementPoint, Series
from perfdrift.store import StoreLayout, encode_record, parse_records, store_append, store_load

T0 = datetime(2025, 1, 9, 20, 4, tzinfo=timezone.utc)
KEY = "moobench/kieker-java-binary-file/os=ubuntu-24.04"


def pt(i, value=2500.0, commit=None):
    return MeasurementPoint(commit or f"{0xcf30000 + i:07x}", T0 + timedelta(hours=3 * i), value, "ns",
                            {"os": "ubuntu-24.04", "runner": "github"}, "schedule")


def test_roundtrip(tmp_path):
    layout = StoreLayout(tmp_path)
    store_append(layout, KEY, pt(0, 2500.1))
    series = store_load(layout, KEY)
    assert series.points == (pt(0, 2500.1),)
    assert layout.keys() == [KEY]


def test_record_schema_is_exact(tmp_path):
    layout = StoreLayout(tmp_path)
    store_append(layout, KEY, pt(0, 0.1 + 0.2))
    line = layout.path_for(KEY).read_text()
    assert line == (
        '{"commit": "cf30000", "env": {"os": "ubuntu-24.04", "runner": "github"}, '
        '"trigger": "schedule", "ts": "2025-01-09T20:04:00Z", "unit": "ns", "value": 0.30000000000000004}\n'
    )


def test_unknown_key_is_empty(tmp_path):
    assert store_load(StoreLayout(tmp_path), "no/such") == Series("no/such")


def test_load_sorts_records(tmp_path):
    layout = StoreLayout(tmp_path)
    for i in (2, 0, 1):
        store_append(layout, KEY, pt(i))
    assert [p.commit for p in store_load(layout, KEY).points] == [pt(i).commit for i in range(3)]


def test_duplicate_dropped_on_load(tmp_path, caplog):
    layout = StoreLayout(tmp_path)
    store_append(layout, KEY, pt(0, 1.0))
    store_append(layout, KEY, pt(0, 2.0))
    assert len(layout.path_for(KEY).read_bytes().splitlines()) == 2
    with caplog.at_level(logging.WARNING):
        series = store_load(layout, KEY)
    assert [p.value for p in series.points] == [1.0]
    assert "duplicate-point" in caplog.text


def test_trailing_partial_line_ignored(tmp_path, caplog):
    layout = StoreLayout(tmp_path)
    for i in range(3):
        store_append(layout, KEY, pt(i))
    path = layout.path_for(KEY)
    with open(path, "ab") as fh:
        fh.write(b'{"commit": "abc')
    with caplog.at_level(logging.WARNING):
        assert len(store_load(layout, KEY)) == 3
    assert "partial" in caplog.text


def test_append_after_crash_discards_partial_tail(tmp_path):
    layout = StoreLayout(tmp_path)
    store_append(layout, KEY, pt(0))
    with open(layout.path_for(KEY), "ab") as fh:
        fh.write(b'{"commit": "half')
    store_append(layout, KEY, pt(1))
    assert len(store_load(layout, KEY)) == 2


def test_corrupt_complete_record(tmp_path):
    layout = StoreLayout(tmp_path)
    store_append(layout, KEY, pt(0))
    with open(layout.path_for(KEY), "ab") as fh:
        fh.write(b'{"commit": "zz", "ts": "2025-01-01T00:00:00Z"}\n')
    with pytest.raises(LoadError) as info:
        store_load(layout, KEY)
    assert info.value.line == 2


def test_unit_mismatch_on_load(tmp_path):
    layout = StoreLayout(tmp_path)
    store_append(layout, KEY, pt(0))
    store_append(layout, KEY, MeasurementPoint("abcdef1", T0 + timedelta(days=9), 1.0, "ms"))
    with pytest.raises(LoadError):
        store_load(layout, KEY)


def test_root_not_a_directory(tmp_path):
    root = tmp_path / "file"
    root.write_text("")
    with pytest.raises(StorageError):
        store_append(StoreLayout(root), KEY, pt(0))


@pytest.mark.skipif(os.geteuid() == 0, reason="root ignores directory permissions")
def test_read_only_root(tmp_path):
    root = tmp_path / "ro"
    root.mkdir()
    root.chmod(0o555)
    try:
        with pytest.raises(StorageError):
            store_append(StoreLayout(root), KEY, pt(0))
    finally:
        root.chmod(0o755)


def test_unwritable_target(tmp_path):
    layout = StoreLayout(tmp_path)
    layout.path_for(KEY).mkdir(parents=True)  # a directory where the record file should be
    with pytest.raises(StorageError):
        store_append(layout, KEY, pt(0))


@pytest.mark.parametrize("key", ["../escape", "a/../../b", "/abs", "UPPER/x"])
def test_unsafe_keys_rejected(tmp_path, key):
    with pytest.raises(InvalidArgument):
        store_append(StoreLayout(tmp_path), key, pt(0))


def test_keys_with_dots_map_to_distinct_files(tmp_path):
    layout = StoreLayout(tmp_path)
    store_append(layout, "b/m.x", pt(0))
    store_append(layout, "b/m.y", pt(1))
    assert layout.keys() == ["b/m.x", "b/m.y"]


def test_fsync_option(tmp_path):
    layout = StoreLayout(tmp_path, fsync=True)
    store_append(layout, KEY, pt(0))
    assert len(store_load(layout, KEY)) == 1


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 40), st.floats(0, 1e6)), min_size=1, max_size=20,
                unique_by=lambda t: t[0]),
       st.randoms(use_true_random=False))
def test_roundtrip_property(tmp_path_factory, items, rnd):
    layout = StoreLayout(tmp_path_factory.mktemp("store"))
    points = [pt(i, v) for i, v in items]
    rnd.shuffle(points)
    for p in points:
        store_append(layout, KEY, p)
    assert list(store_load(layout, KEY).points) == sorted(points, key=lambda p: p.sort_key)


def test_truncation_at_every_byte_gives_prefix():
    points = [pt(i, 1000.0 + i) for i in range(5)]
    data = b"".join(encode_record(p) for p in points)
    boundaries = [0]
    for p in points:
        boundaries.append(boundaries[-1] + len(encode_record(p)))
    for cut in range(len(data) + 1):
        series = parse_records(data[:cut], KEY)
        complete = max(k for k, b in enumerate(boundaries) if b <= cut)
        assert list(series.points) == points[:complete]


def test_corrupt_json_names_line():
    data = encode_record(pt(0)) + b"not json\n"
    with pytest.raises(LoadError, match="line 2"):
        parse_records(data, KEY)


def test_non_object_record():
    with pytest.raises(LoadError):
        parse_records(json.dumps([1, 2]).encode() + b"\n", KEY)
