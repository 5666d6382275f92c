"""Markdown change reports and SVG plots of a series with change markers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime
from typing import Sequence
from xml.sax.saxutils import escape

from .errors import InvalidArgument
from .model import ChangePoint, DetectionConfig, Series, format_timestamp

NO_CHANGES = "no significant change points detected"


@dataclass(frozen=True)
class ChangeReport:
    series_key: str
    generated_at: datetime
    config: DetectionConfig
    changes: tuple[ChangePoint, ...] = ()
    points: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "changes", tuple(sorted(self.changes, key=lambda c: c.index)))

    @property
    def summary(self) -> str:
        if not self.changes:
            return NO_CHANGES
        up = sum(1 for c in self.changes if c.magnitude > 0)
        down = len(self.changes) - up
        noun = "change point" if len(self.changes) == 1 else "change points"
        return f"{len(self.changes)} significant {noun} detected ({up} increase, {down} decrease)"


def format_magnitude(magnitude: float) -> str:
    if math.isinf(magnitude):
        return "+inf%" if magnitude > 0 else "-inf%"
    return f"{magnitude * 100:+.1f}%"


def format_pvalue(p: float) -> str:
    return f"{p:.3g}"


def _arrow(magnitude: float) -> str:
    if magnitude > 0:
        return "↑"
    return "↓" if magnitude < 0 else "→"


def render_markdown(report: ChangeReport) -> str:
    """Issue-body style markdown for a change report."""
    cfg = report.config
    lines = [
        f"## Performance changes in `{report.series_key}`",
        "",
        f"Generated at {format_timestamp(report.generated_at)} over {report.points} points.",
        "",
        "| setting | value |",
        "|---|---|",
        f"| p-value threshold | {cfg.p_threshold:g} |",
        f"| magnitude threshold | {cfg.magnitude_threshold * 100:.1f}% |",
        f"| alpha | {cfg.alpha:g} |",
        f"| permutations | {cfg.permutations} |",
        f"| min segment | {cfg.min_segment} |",
        f"| seed | {cfg.seed} |",
        "",
    ]
    if report.changes:
        lines += [
            "| index | before | after | direction | magnitude | p-value | qhat |",
            "|---:|---|---|:---:|---:|---:|---:|",
        ]
        for c in report.changes:
            lines.append(
                f"| {c.index} | `{c.before_commit}` | `{c.after_commit}` | {_arrow(c.magnitude)} "
                f"| {format_magnitude(c.magnitude)} | {format_pvalue(c.p_value)} | {c.qhat:.6g} |"
            )
        lines.append("")
    lines.append(f"**Summary:** {report.summary}.")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class PlotPoint:
    x: int
    label: str
    y: float
    value: float
    clipped: bool = False


@dataclass(frozen=True)
class PlotSpec:
    title: str
    unit: str
    points: tuple[PlotPoint, ...]
    clip_threshold: float | None = None
    change_markers: tuple[int, ...] = field(default_factory=tuple)


def make_plot_spec(series: Series, changes: Sequence[ChangePoint] | Sequence[int] = (),
                   clip: float | None = None) -> PlotSpec:
    """Plot data for ``series``; values above ``clip`` are capped for display only."""
    indices = sorted(c.index if isinstance(c, ChangePoint) else int(c) for c in changes)
    for idx in indices:
        if not 0 <= idx < len(series):
            raise InvalidArgument(f"change index {idx} outside series of length {len(series)}")
    points = []
    for i, p in enumerate(series.points):
        clipped = clip is not None and p.value > clip
        points.append(PlotPoint(
            x=i,
            label=f"{p.commit[:7]} {format_timestamp(p.timestamp)}",
            y=clip if clipped else p.value,
            value=p.value,
            clipped=clipped,
        ))
    return PlotSpec(series.key, series.unit or "", tuple(points), clip, tuple(indices))


_WIDTH, _HEIGHT = 800, 400
_LEFT, _RIGHT, _TOP, _BOTTOM = 70, 20, 40, 50


def _num(v: float) -> str:
    return f"{v:.2f}"


def emit_svg(plot: PlotSpec) -> bytes:
    """Standalone SVG 1.1 line chart; change points are red dots."""
    if not plot.points:
        raise InvalidArgument("cannot plot an empty series")
    ys = [p.y for p in plot.points]
    lo, hi = min(ys), max(ys)
    if hi == lo:
        lo, hi = lo - 1.0, hi + 1.0
    n = len(plot.points)
    plot_w = _WIDTH - _LEFT - _RIGHT
    plot_h = _HEIGHT - _TOP - _BOTTOM

    def sx(i: int) -> float:
        return _LEFT + (plot_w * i / (n - 1) if n > 1 else plot_w / 2)

    def sy(v: float) -> float:
        return _TOP + plot_h * (hi - v) / (hi - lo)

    out = [
        '<?xml version="1.0" encoding="UTF-8" standalone="yes"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f"<title>{escape(plot.title)}</title>",
        f'<rect x="0" y="0" width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        f'<line class="axis" x1="{_LEFT}" y1="{_TOP + plot_h}" x2="{_LEFT + plot_w}" y2="{_TOP + plot_h}" stroke="black"/>',
        f'<line class="axis" x1="{_LEFT}" y1="{_TOP}" x2="{_LEFT}" y2="{_TOP + plot_h}" stroke="black"/>',
        f'<text x="{_LEFT - 5}" y="{_TOP + 4}" text-anchor="end" font-size="11">{hi:g}</text>',
        f'<text x="{_LEFT - 5}" y="{_TOP + plot_h + 4}" text-anchor="end" font-size="11">{lo:g}</text>',
        f'<text x="{_LEFT + plot_w / 2:g}" y="{_HEIGHT - 12}" text-anchor="middle" font-size="12">run</text>',
        f'<text x="15" y="{_TOP + plot_h / 2:g}" font-size="12" '
        f'transform="rotate(-90 15 {_TOP + plot_h / 2:g})" text-anchor="middle">{escape(plot.unit)}</text>',
        f'<text x="{_LEFT}" y="{_TOP - 15}" font-size="14">{escape(plot.title)}</text>',
    ]
    if plot.clip_threshold is not None:
        out.append(
            f'<text x="{_LEFT + plot_w}" y="{_TOP - 15}" text-anchor="end" font-size="11">'
            f"values &gt; {plot.clip_threshold:g} clipped</text>"
        )
    coords = " ".join(f"{_num(sx(p.x))},{_num(sy(p.y))}" for p in plot.points)
    out.append(f'<polyline class="series" fill="none" stroke="steelblue" stroke-width="1.5" points="{coords}"/>')
    for p in plot.points:
        cx, cy = _num(sx(p.x)), _num(sy(p.y))
        tip = escape(f"{p.label}: {p.value:g}")
        if p.clipped:
            out.append(
                f'<rect class="clipped" x="{_num(sx(p.x) - 3)}" y="{_num(sy(p.y) - 3)}" width="6" height="6" '
                f'fill="orange" data-value="{p.value!r}"><title>{tip} (clipped)</title></rect>'
            )
        else:
            out.append(f'<circle class="point" cx="{cx}" cy="{cy}" r="2" fill="steelblue"><title>{tip}</title></circle>')
    for idx in plot.change_markers:
        p = plot.points[idx]
        out.append(
            f'<circle class="change-marker" cx="{_num(sx(p.x))}" cy="{_num(sy(p.y))}" r="5" fill="red">'
            f"<title>change at {escape(p.label)}</title></circle>"
        )
    out.append("</svg>")
    return ("\n".join(out) + "\n").encode("utf-8")


def changes_payload(changes: Sequence[ChangePoint]) -> dict:
    """JSON-ready detection result shared by the CLI and the HTTP service."""
    return {"changes": [c.to_dict() for c in sorted(changes, key=lambda c: c.index)]}
