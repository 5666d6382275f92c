"""Command line entry point.

Exit codes: 0 success, 1 usage error, 2 data/parse/storage error,
3 at least one change point passed both detection filters.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import re
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

from . import __version__
from .edivisive import detect
from .errors import InvalidArgument, PerfDriftError
from .ingest import AGGREGATORS, aggregate_entries, parse_gha_json, parse_moobench_csv
from .model import DetectionConfig, MeasurementPoint, Series, Trigger, make_series_key, parse_timestamp
from .report import ChangeReport, changes_payload, emit_svg, make_plot_spec, render_markdown
from .simulate import SimSpec, simulate
from .stats import paired_t_test, shapiro_wilk, welch_t_test
from .store import StoreLayout, encode_record, store_append, store_load

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_CHANGES = 3

STORE_ENV = "PERFDRIFT_STORE"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # type: ignore[override]
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _timestamp(text: str) -> datetime:
    if text == "now":
        return datetime.now(timezone.utc).replace(microsecond=0)
    return parse_timestamp(text)


def _env_pairs(pairs: Sequence[str] | None) -> dict[str, str]:
    env = {}
    for pair in pairs or ():
        name, sep, value = pair.partition("=")
        if not sep or not name:
            raise UsageError(f"--env expects k=v, got {pair!r}")
        env[name] = value
    return env


def _shift(text: str) -> tuple[int, float]:
    idx, sep, rel = text.partition(":")
    try:
        if not sep:
            raise ValueError
        return int(idx), float(rel)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected IDX:REL, got {text!r}") from None


def _add_store(p: argparse.ArgumentParser) -> None:
    p.add_argument("--store", default=os.environ.get(STORE_ENV),
                   help=f"store directory (default: ${STORE_ENV})")


def _add_detection(p: argparse.ArgumentParser) -> None:
    p.add_argument("--pvalue", type=float, default=0.001)
    p.add_argument("--magnitude", type=float, default=0.05)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--permutations", type=int, default=999)
    p.add_argument("--min-segment", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)


def config_from_args(args: argparse.Namespace) -> DetectionConfig:
    return DetectionConfig(
        alpha=args.alpha,
        p_threshold=args.pvalue,
        magnitude_threshold=args.magnitude,
        permutations=args.permutations,
        min_segment=args.min_segment,
        seed=args.seed,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="perfdrift", description="Change-point detection for benchmark series.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    p = sub.add_parser("add", help="append one measurement")
    _add_store(p)
    p.add_argument("--series", required=True)
    p.add_argument("--commit", required=True)
    p.add_argument("--timestamp", required=True)
    p.add_argument("--value", required=True, type=float)
    p.add_argument("--unit", required=True)
    p.add_argument("--trigger", choices=[t.value for t in Trigger], default="push")
    p.add_argument("--env", action="append", metavar="K=V")

    p = sub.add_parser("ingest", help="ingest a benchmark result file")
    _add_store(p)
    p.add_argument("--format", required=True, choices=["gha-json", "moobench-csv"])
    p.add_argument("--series-prefix", required=True)
    p.add_argument("--commit", required=True)
    p.add_argument("--timestamp", required=True)
    p.add_argument("--aggregate", choices=sorted(AGGREGATORS), default="mean")
    p.add_argument("--trigger", choices=[t.value for t in Trigger], default="push")
    p.add_argument("--env", action="append", metavar="K=V")
    p.add_argument("--column", default="duration_ns", help="value column for moobench-csv")
    p.add_argument("--name", help="benchmark name for moobench-csv (default: file stem)")
    p.add_argument("file")

    p = sub.add_parser("detect", help="detect change points in a stored series")
    _add_store(p)
    p.add_argument("--series", required=True)
    _add_detection(p)
    p.add_argument("--output", choices=["json", "markdown"], default="json")

    p = sub.add_parser("validate", help="normality and t-test on two samples")
    p.add_argument("--a", required=True, metavar="FILE")
    p.add_argument("--b", required=True, metavar="FILE")
    p.add_argument("--test", choices=["paired", "welch"], default="paired")

    p = sub.add_parser("report", help="write markdown and SVG reports")
    _add_store(p)
    p.add_argument("--series", required=True)
    p.add_argument("--markdown", required=True, metavar="OUT.md")
    p.add_argument("--svg", metavar="OUT.svg")
    p.add_argument("--clip", type=float)
    _add_detection(p)

    p = sub.add_parser("simulate", help="generate a synthetic series")
    p.add_argument("--points", type=int, required=True)
    p.add_argument("--base", type=float, required=True)
    p.add_argument("--shift", type=_shift, nargs="+", action="extend", default=[], metavar="IDX:REL")
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--outlier-prob", type=float, default=0.0)
    p.add_argument("--outlier-scale", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--unit", default="ns")
    target = p.add_mutually_exclusive_group(required=True)
    target.add_argument("--out", metavar="FILE")
    target.add_argument("--store")
    p.add_argument("--series", help="series key when writing to --store")

    p = sub.add_parser("serve", help="run the HTTP ingest/query service")
    _add_store(p)
    p.add_argument("--listen", default="127.0.0.1:8080", metavar="HOST:PORT")
    p.add_argument("--max-body", type=int, default=1 << 20)
    return parser


def _layout(args: argparse.Namespace) -> StoreLayout:
    if not args.store:
        raise UsageError(f"--store is required (or set ${STORE_ENV})")
    return StoreLayout(Path(args.store))


def _cmd_add(args: argparse.Namespace) -> int:
    point = MeasurementPoint(
        commit=args.commit,
        timestamp=_timestamp(args.timestamp),
        value=args.value,
        unit=args.unit,
        env=_env_pairs(args.env),
        trigger=args.trigger,
    )
    store_append(_layout(args), args.series, point)
    return EXIT_OK


def _cmd_ingest(args: argparse.Namespace) -> int:
    layout = _layout(args)
    path = Path(args.file)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise InvalidArgument(f"cannot read {path}: {exc}") from exc
    if args.format == "gha-json":
        result = parse_gha_json(data)
    else:
        result = parse_moobench_csv(data, column=args.column, name=args.name or path.stem)
    env = _env_pairs(args.env)
    timestamp = _timestamp(args.timestamp)
    points = []
    for entry in aggregate_entries(result, args.aggregate):
        key = make_series_key(args.series_prefix, entry.name, env)
        point = MeasurementPoint(args.commit, timestamp, entry.value, entry.unit, env, args.trigger)
        points.append((key, point))
    for key, point in points:
        store_append(layout, key, point)
        print(key)
    return EXIT_OK


def _detect(args: argparse.Namespace) -> tuple[Series, DetectionConfig, list]:
    config = config_from_args(args)
    series = store_load(_layout(args), args.series)
    return series, config, detect(series, config)


def _report_for(series: Series, config: DetectionConfig, changes: list) -> ChangeReport:
    # the newest point's time keeps re-rendering byte-identical
    generated = series.points[-1].timestamp if series.points else datetime(1970, 1, 1, tzinfo=timezone.utc)
    return ChangeReport(series.key, generated, config, tuple(changes), len(series))


def _cmd_detect(args: argparse.Namespace) -> int:
    series, config, changes = _detect(args)
    if args.output == "json":
        print(json.dumps(changes_payload(changes), sort_keys=True))
    else:
        sys.stdout.write(render_markdown(_report_for(series, config, changes)))
    return EXIT_CHANGES if changes else EXIT_OK


def _cmd_report(args: argparse.Namespace) -> int:
    series, config, changes = _detect(args)
    Path(args.markdown).write_text(render_markdown(_report_for(series, config, changes)), encoding="utf-8")
    if args.svg:
        if not series.points:
            raise InvalidArgument(f"series {args.series!r} is empty; nothing to plot")
        Path(args.svg).write_bytes(emit_svg(make_plot_spec(series, changes, args.clip)))
    return EXIT_CHANGES if changes else EXIT_OK


_NUMBER_SPLIT = re.compile(r"[\s,;]+")


def read_sample(path: str) -> list[float]:
    """Numbers from a text file; whitespace, comma or semicolon separated, ``#`` comments."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise InvalidArgument(f"cannot read sample {path}: {exc}") from exc
    values = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0]
        for token in filter(None, _NUMBER_SPLIT.split(line.strip())):
            try:
                values.append(float(token))
            except ValueError:
                raise InvalidArgument(f"{path}:{lineno}: not a number: {token!r}") from None
    return values


def _cmd_validate(args: argparse.Namespace) -> int:
    a, b = read_sample(args.a), read_sample(args.b)
    for label, sample, path in (("a", a, args.a), ("b", b, args.b)):
        sw = shapiro_wilk(sample)
        print(f"shapiro-wilk {label} ({path}): n={sw.n[0]} w={sw.statistic:.5f} p={sw.p_value:.7g}")
    if args.test == "paired":
        if len(a) != len(b):
            raise InvalidArgument(
                f"paired t-test needs samples of equal length, got {len(a)} and {len(b)} "
                "(use --test welch for unequal lengths)"
            )
        res = paired_t_test(a, b)
        name = "paired t-test"
    else:
        res = welch_t_test(a, b)
        name = "welch t-test"
    verdict = "significant" if res.significant else "not significant"
    print(f"{name}: t={res.statistic:.6g} df={res.df:.6g} p={res.p_value:.7g} -> {verdict} at p < 0.05")
    return EXIT_OK


def _cmd_simulate(args: argparse.Namespace) -> int:
    spec = SimSpec(
        n_points=args.points,
        base_mean=args.base,
        segments=tuple(sorted(args.shift)),
        noise_sigma_rel=args.noise,
        outlier_prob=args.outlier_prob,
        outlier_scale=args.outlier_scale,
        seed=args.seed,
    )
    if args.store:
        if not args.series:
            raise UsageError("--series is required with --store")
        series = simulate(spec, key=args.series, unit=args.unit)
        layout = StoreLayout(Path(args.store))
        for point in series.points:
            store_append(layout, args.series, point)
    else:
        series = simulate(spec, key=args.series or "sim/value", unit=args.unit)
        Path(args.out).write_bytes(b"".join(encode_record(p) for p in series.points))
    return EXIT_OK


def _cmd_serve(args: argparse.Namespace) -> int:
    from .service import serve

    host, sep, port = args.listen.rpartition(":")
    if not sep or not port.isdigit():
        raise UsageError(f"--listen expects HOST:PORT, got {args.listen!r}")
    serve(_layout(args), host or "127.0.0.1", int(port), max_body=args.max_body)
    return EXIT_OK


COMMANDS = {
    "add": _cmd_add,
    "ingest": _cmd_ingest,
    "detect": _cmd_detect,
    "validate": _cmd_validate,
    "report": _cmd_report,
    "simulate": _cmd_simulate,
    "serve": _cmd_serve,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except PerfDriftError as exc:
        print(f"perfdrift: {exc.code}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
