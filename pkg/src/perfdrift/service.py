"""Minimal HTTP ingest/query service over a series store.

Endpoints:

``POST /api/v1/result``
    ``{"commit", "timestamp", "benchmarks": [gha entries], "env"?, "trigger"?, "prefix"?}``;
    appends one point per benchmark name, responds 201 with the keys written.
``GET /api/v1/series/{key}``
    stored records as ``{"key", "points": [...]}``.
``GET /api/v1/changes/{key}?pvalue=&magnitude=&seed=&alpha=&permutations=&min_segment=``
    detection result, same shape as ``perfdrift detect --output json``.
"""

from __future__ import annotations

import json
import logging
import threading
from collections import defaultdict
from http import HTTPStatus
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, unquote, urlsplit

from .edivisive import detect
from .errors import InvalidArgument, PerfDriftError, SchemaError, StorageError
from .ingest import BenchmarkResultFile, ResultEntry, ResultFormat, aggregate_entries, parse_gha_entries
from .model import DetectionConfig, MeasurementPoint, make_series_key
from .report import changes_payload
from .store import StoreLayout, point_to_record, store_append, store_load

logger = logging.getLogger(__name__)

DEFAULT_MAX_BODY = 1 << 20
DEFAULT_PREFIX = "bench"

_QUERY_PARAMS = {
    "pvalue": ("p_threshold", float),
    "magnitude": ("magnitude_threshold", float),
    "seed": ("seed", int),
    "alpha": ("alpha", float),
    "permutations": ("permutations", int),
    "min_segment": ("min_segment", int),
}


class _KeyLocks:
    """One lock per series key, serialising writers of the same file."""

    def __init__(self) -> None:
        self._guard = threading.Lock()
        self._locks: dict[str, threading.Lock] = defaultdict(threading.Lock)

    def __call__(self, key: str) -> threading.Lock:
        with self._guard:
            return self._locks[key]


def config_from_query(query: str) -> DetectionConfig:
    params = parse_qs(query, keep_blank_values=False)
    kwargs = {}
    for name, values in params.items():
        if name not in _QUERY_PARAMS:
            raise InvalidArgument(f"unknown query parameter {name!r}")
        field, conv = _QUERY_PARAMS[name]
        try:
            kwargs[field] = conv(values[-1])
        except ValueError:
            raise InvalidArgument(f"query parameter {name!r} has invalid value {values[-1]!r}") from None
    return DetectionConfig(**kwargs)


def points_from_body(body: object) -> list[tuple[str, MeasurementPoint]]:
    if not isinstance(body, dict):
        raise SchemaError("request body must be an object")
    for name in ("commit", "timestamp", "benchmarks"):
        if name not in body:
            raise SchemaError(f"missing required field {name!r}", field=name)
    env = body.get("env") or {}
    if not isinstance(env, dict) or not all(isinstance(k, str) and isinstance(v, str) for k, v in env.items()):
        raise SchemaError("field 'env' must map strings to strings", field="env")
    prefix = body.get("prefix", DEFAULT_PREFIX)
    if not isinstance(prefix, str) or not prefix:
        raise SchemaError("field 'prefix' must be a non-empty string", field="prefix")
    if not isinstance(body["commit"], str):
        raise SchemaError("field 'commit' must be a string", field="commit")
    if not isinstance(body["timestamp"], str):
        raise SchemaError("field 'timestamp' must be a string", field="timestamp")
    entries: tuple[ResultEntry, ...] = parse_gha_entries(body["benchmarks"])
    merged = aggregate_entries(BenchmarkResultFile(ResultFormat.GHA_JSON, entries))
    out = []
    for entry in merged:
        point = MeasurementPoint(
            commit=body["commit"],
            timestamp=body["timestamp"],
            value=entry.value,
            unit=entry.unit,
            env=env,
            trigger=body.get("trigger", "push"),
        )
        out.append((make_series_key(prefix, entry.name, env), point))
    return out


class ResultHandler(BaseHTTPRequestHandler):
    server: "PerfDriftServer"
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt: str, *args) -> None:
        logger.info("%s %s", self.address_string(), fmt % args)

    def _send(self, status: int, payload: dict) -> None:
        body = json.dumps(payload, sort_keys=True).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _error(self, status: int, exc: Exception | str) -> None:
        code = getattr(exc, "code", "error")
        self._send(status, {"error": code, "detail": str(exc)})

    def _key(self, path: str, prefix: str) -> str | None:
        if not path.startswith(prefix):
            return None
        return unquote(path[len(prefix):])

    def do_GET(self) -> None:
        url = urlsplit(self.path)
        layout = self.server.layout
        try:
            key = self._key(url.path, "/api/v1/series/")
            if key is not None:
                series = store_load(layout, key)
                self._send(HTTPStatus.OK, {"key": key, "points": [point_to_record(p) for p in series.points]})
                return
            key = self._key(url.path, "/api/v1/changes/")
            if key is not None:
                config = config_from_query(url.query)
                series = store_load(layout, key)
                self._send(HTTPStatus.OK, changes_payload(detect(series, config)))
                return
            self._error(HTTPStatus.NOT_FOUND, f"no route for {url.path}")
        except StorageError as exc:
            self._error(HTTPStatus.INTERNAL_SERVER_ERROR, exc)
        except PerfDriftError as exc:
            self._error(HTTPStatus.BAD_REQUEST, exc)
        except Exception:
            logger.exception("unhandled error for GET %s", self.path)
            self._error(HTTPStatus.INTERNAL_SERVER_ERROR, "internal error")

    def do_POST(self) -> None:
        url = urlsplit(self.path)
        if url.path != "/api/v1/result":
            self._drain()
            self._error(HTTPStatus.NOT_FOUND, f"no route for {url.path}")
            return
        try:
            length = int(self.headers.get("Content-Length", ""))
        except ValueError:
            self.close_connection = True
            self._error(HTTPStatus.LENGTH_REQUIRED, "Content-Length header required")
            return
        if length > self.server.max_body:
            self.close_connection = True
            self._error(HTTPStatus.REQUEST_ENTITY_TOO_LARGE, f"payload exceeds {self.server.max_body} bytes")
            return
        raw = self.rfile.read(length)
        try:
            body = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            self._send(HTTPStatus.BAD_REQUEST, {"error": "parse-error", "detail": str(exc)})
            return
        try:
            points = points_from_body(body)
            written = []
            for key, point in points:
                with self.server.locks(key):
                    store_append(self.server.layout, key, point)
                written.append(key)
        except StorageError as exc:
            self._error(HTTPStatus.INTERNAL_SERVER_ERROR, exc)
            return
        except PerfDriftError as exc:
            self._error(HTTPStatus.BAD_REQUEST, exc)
            return
        except Exception:
            logger.exception("unhandled error for POST %s", self.path)
            self._error(HTTPStatus.INTERNAL_SERVER_ERROR, "internal error")
            return
        self._send(HTTPStatus.CREATED, {"appended": written})

    def _drain(self) -> None:
        length = int(self.headers.get("Content-Length") or 0)
        if 0 < length <= self.server.max_body:
            self.rfile.read(length)
        elif length:
            self.close_connection = True


class PerfDriftServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, layout: StoreLayout, address: tuple[str, int], max_body: int = DEFAULT_MAX_BODY):
        super().__init__(address, ResultHandler)
        self.layout = layout
        self.max_body = max_body
        self.locks = _KeyLocks()


def make_server(layout: StoreLayout, host: str = "127.0.0.1", port: int = 0,
                max_body: int = DEFAULT_MAX_BODY) -> PerfDriftServer:
    if not layout.root.is_dir():
        raise StorageError(f"store root {layout.root} is not a directory")
    return PerfDriftServer(layout, (host, port), max_body)


def serve(layout: StoreLayout, host: str, port: int, max_body: int = DEFAULT_MAX_BODY) -> None:
    """Run the service until interrupted."""
    server = make_server(layout, host, port, max_body)
    logger.warning("serving %s on http://%s:%d", layout.root, *server.server_address[:2])
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
