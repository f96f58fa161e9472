"""Training-curve rendering. Self-contained SVG, no plotting dependency."""

from __future__ import annotations

import csv
import math
from pathlib import Path

PANEL_W = 880
PANEL_H = 200
MARGIN_L = 70
MARGIN_R = 20
MARGIN_TOP = 34
PANEL_GAP = 36


def _read_metrics(path) -> dict[str, list[float]]:
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: empty metrics file")
        for col in ("episode", "steps", "coverage", "r_sys"):
            if col not in reader.fieldnames:
                raise ValueError(f"{path}: missing column '{col}'")
        cols: dict[str, list[float]] = {name: [] for name in reader.fieldnames}
        for row in reader:
            for name in cols:
                cols[name].append(float(row[name]))
    if not cols["episode"]:
        raise ValueError(f"{path}: no data rows")
    return cols


def _downsample(xs: list[float], ys: list[float], cap: int = 2000):
    stride = max(1, math.ceil(len(xs) / cap))
    if stride == 1:
        return xs, ys
    # keep the last point so the final episode is always visible
    xd = xs[::stride]
    yd = ys[::stride]
    if xd[-1] != xs[-1]:
        xd.append(xs[-1])
        yd.append(ys[-1])
    return xd, yd


def _fmt(v: float) -> str:
    if v == int(v) and abs(v) < 1e7:
        return str(int(v))
    return f"{v:.4g}"


def _panel(
    xs: list[float], ys: list[float], title: str, color: str, y_top: int
) -> list[str]:
    x0, x1 = xs[0], xs[-1]
    lo, hi = min(ys), max(ys)
    if hi == lo:
        hi = lo + 1.0
    xspan = (x1 - x0) or 1.0

    def px(x: float) -> float:
        return MARGIN_L + (x - x0) / xspan * (PANEL_W - MARGIN_L - MARGIN_R)

    def py(y: float) -> float:
        return y_top + PANEL_H - (y - lo) / (hi - lo) * PANEL_H

    pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, ys))
    bottom = y_top + PANEL_H
    return [
        f'<text x="{MARGIN_L}" y="{y_top - 10}" class="title">{title}</text>',
        f'<line x1="{MARGIN_L}" y1="{y_top}" x2="{MARGIN_L}" y2="{bottom}" class="axis"/>',
        f'<line x1="{MARGIN_L}" y1="{bottom}" x2="{PANEL_W - MARGIN_R}" y2="{bottom}" class="axis"/>',
        f'<text x="{MARGIN_L - 6}" y="{y_top + 5}" class="ylab">{_fmt(hi)}</text>',
        f'<text x="{MARGIN_L - 6}" y="{bottom}" class="ylab">{_fmt(lo)}</text>',
        f'<text x="{MARGIN_L}" y="{bottom + 16}" class="xlab">{_fmt(x0)}</text>',
        f'<text x="{PANEL_W - MARGIN_R}" y="{bottom + 16}" class="xlab" text-anchor="end">{_fmt(x1)}</text>',
        f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.2"/>',
    ]


def render_metrics_svg(metrics_csv) -> str:
    """Three stacked panels: steps, coverage, and system reward per episode."""
    cols = _read_metrics(metrics_csv)
    panels = [
        ("steps per episode", "steps", "#c0392b"),
        ("final coverage ratio", "coverage", "#2471a3"),
        ("system reward", "r_sys", "#1e8449"),
    ]
    height = MARGIN_TOP + len(panels) * (PANEL_H + PANEL_GAP)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{PANEL_W}" height="{height}" '
        f'viewBox="0 0 {PANEL_W} {height}">',
        "<style>"
        "text{font-family:sans-serif;font-size:12px;fill:#333}"
        ".title{font-size:14px;font-weight:bold}"
        ".ylab{text-anchor:end}"
        ".axis{stroke:#999;stroke-width:1}"
        "</style>",
        f'<rect width="{PANEL_W}" height="{height}" fill="white"/>',
    ]
    y = MARGIN_TOP
    for title, col, color in panels:
        xs, ys = _downsample(cols["episode"], cols[col])
        parts.extend(_panel(xs, ys, title, color, y))
        y += PANEL_H + PANEL_GAP
    parts.append("</svg>")
    return "\n".join(parts)


def plot_metrics(metrics_csv, out_svg) -> Path:
    out = Path(out_svg)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(render_metrics_svg(metrics_csv), encoding="utf-8")
    return out
