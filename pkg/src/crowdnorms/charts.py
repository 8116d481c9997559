"""Static SVG line charts from CSV columns.

Output depends only on the input values, so identical CSVs give
byte-identical SVGs.  Non-finite cells (``nan``) are left out of their
series.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 640, 400
MARGIN = dict(left=70, right=150, top=30, bottom=55)
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f")


class ChartError(ValueError):
    pass


def read_columns(path: str | Path, names: Sequence[str]) -> dict[str, list[float]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for name in names:
            if name not in header:
                raise ChartError(f"column {name!r} not in {Path(path).name} (have {', '.join(header)})")
        cols: dict[str, list[float]] = {n: [] for n in names}
        for lineno, row in enumerate(reader, 2):
            for name in names:
                cell = row[name]
                try:
                    cols[name].append(float(cell))
                except (TypeError, ValueError):
                    raise ChartError(f"non-numeric cell {cell!r} in column {name!r}, line {lineno}") from None
    return cols


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi == lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 5, 10) if m * mag >= raw)
    first = math.ceil(lo / step - 1e-9) * step
    out = []
    k = 0
    while first + k * step <= hi + 1e-9 * step:
        out.append(round(first + k * step, 12))
        k += 1
    return out


def _span(values: list[float]) -> tuple[float, float]:
    finite = [v for v in values if math.isfinite(v)]
    if not finite:
        return 0.0, 1.0
    lo, hi = min(finite), max(finite)
    if lo == hi:
        pad = abs(lo) * 0.05 or 0.5
        return lo - pad, hi + pad
    return lo, hi


def _num(v: float) -> str:
    return f"{v:.2f}"


def _label(v: float) -> str:
    return format(v, ".6g")


def chart_svg(x: list[float], series: dict[str, list[float]], x_label: str, title: str = "") -> str:
    x0, x1 = _span(x)
    y0, y1 = _span([v for ys in series.values() for v in ys])
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def sx(v):
        return MARGIN["left"] + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return MARGIN["top"] + ph - (v - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{WIDTH / 2:.2f}" y="18" text-anchor="middle" font-family="sans-serif" font-size="14">{escape(title)}</text>')
    bottom, left = MARGIN["top"] + ph, MARGIN["left"]
    out.append(f'<line x1="{left}" y1="{bottom}" x2="{left + pw}" y2="{bottom}" stroke="black"/>')
    out.append(f'<line x1="{left}" y1="{MARGIN["top"]}" x2="{left}" y2="{bottom}" stroke="black"/>')
    for t in _ticks(x0, x1):
        out.append(f'<line x1="{_num(sx(t))}" y1="{bottom}" x2="{_num(sx(t))}" y2="{bottom + 5}" stroke="black"/>')
        out.append(f'<text x="{_num(sx(t))}" y="{bottom + 18}" text-anchor="middle" font-family="sans-serif" font-size="11">{_label(t)}</text>')
    for t in _ticks(y0, y1):
        out.append(f'<line x1="{left - 5}" y1="{_num(sy(t))}" x2="{left}" y2="{_num(sy(t))}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{_num(sy(t) + 4)}" text-anchor="end" font-family="sans-serif" font-size="11">{_label(t)}</text>')
    out.append(f'<text x="{left + pw / 2:.2f}" y="{HEIGHT - 12}" text-anchor="middle" font-family="sans-serif" font-size="12">{escape(x_label)}</text>')

    for k, (name, ys) in enumerate(series.items()):
        color = COLORS[k % len(COLORS)]
        pts = [(sx(a), sy(b)) for a, b in zip(x, ys) if math.isfinite(a) and math.isfinite(b)]
        if len(pts) > 1:
            path = " ".join(f"{_num(a)},{_num(b)}" for a, b in pts)
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{path}"/>')
        for a, b in pts:
            out.append(f'<circle cx="{_num(a)}" cy="{_num(b)}" r="2.5" fill="{color}"/>')
        ly = MARGIN["top"] + 16 * k + 8
        lx = left + pw + 12
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 18}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 24}" y="{ly + 4}" font-family="sans-serif" font-size="11">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_chart(
    csv_path: str | Path, x: str, ys: Sequence[str], out: str | Path | None = None, title: str = ""
) -> Path:
    """Draw one polyline per ``ys`` column against ``x``; writes next to the CSV by default."""
    if not ys:
        raise ChartError("need at least one y column")
    cols = read_columns(csv_path, [x, *ys])
    svg = chart_svg(cols[x], {y: cols[y] for y in ys}, x, title)
    out = Path(out) if out else Path(csv_path).with_suffix(".svg")
    out.write_text(svg, encoding="utf-8", newline="")
    return out
