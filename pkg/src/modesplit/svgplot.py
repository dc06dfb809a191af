"""Minimal SVG line and scatter plots, written directly as markup."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


@dataclass
class Series:
    x: Sequence[float]
    y: Sequence[float]
    label: str = ""
    markers: bool = False  # draw points instead of a polyline
    color: str | None = None


@dataclass
class Plot:
    series: list[Series] = field(default_factory=list)
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    width: int = 640
    height: int = 420
    logy: bool = False

    def add(self, x, y, label="", markers=False, color=None) -> Plot:
        self.series.append(Series(list(map(float, x)), list(map(float, y)), label, markers, color))
        return self

    def to_svg(self) -> str:
        return render(self)

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_svg())


def nice_ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    """Round tick positions covering [lo, hi]."""
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return []
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / max(count, 1)
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    if step <= 1e-12 * max(abs(lo), abs(hi)):
        return [lo, hi]  # span below float resolution
    first, last = math.ceil(lo / step - 1e-9), math.floor(hi / step + 1e-9)
    ticks = [k * step for k in range(first, min(last, first + 4 * count) + 1)]
    return [0.0 if abs(t) < 1e-12 * step else t for t in ticks]


def _fmt(v: float) -> str:
    if v == 0:
        return "0"
    a = abs(v)
    if a >= 1e5 or a < 1e-3:
        return f"{v:.3g}"
    return f"{v:.6g}"


def render(plot: Plot) -> str:
    W, H = plot.width, plot.height
    left, right, top, bottom = 78, 20, 34 if plot.title else 14, 52
    pw, ph = W - left - right, H - top - bottom

    def ty(v):
        return np.log10(v) if plot.logy else v

    xs = [v for s in plot.series for v in s.x if math.isfinite(v)]
    ys = [ty(v) for s in plot.series for v in s.y if math.isfinite(v) and (v > 0 or not plot.logy)]
    x0, x1 = (min(xs), max(xs)) if xs else (0.0, 1.0)
    y0, y1 = (min(ys), max(ys)) if ys else (0.0, 1.0)
    if x1 - x0 <= 1e-9 * max(abs(x0), abs(x1)):
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 - y0 <= 1e-9 * max(abs(y0), abs(y1)):
        pad = abs(y0) * 1e-6 or 0.5
        y0, y1 = y0 - pad, y1 + pad
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    def px(v):
        return left + (v - x0) / (x1 - x0) * pw

    def py(v):
        return top + (1 - (ty(v) - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" '
        'font-family="sans-serif" font-size="12">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
    ]
    if plot.title:
        out.append(f'<text x="{W / 2:.1f}" y="20" text-anchor="middle" font-size="14">{escape(plot.title)}</text>')
    for t in nice_ticks(x0, x1):
        X = px(t)
        out.append(f'<line x1="{X:.1f}" y1="{top}" x2="{X:.1f}" y2="{top + ph}" stroke="#eee"/>')
        out.append(f'<text x="{X:.1f}" y="{top + ph + 16}" text-anchor="middle">{_fmt(t)}</text>')
    for t in nice_ticks(y0, y1):
        Y = top + (1 - (t - y0) / (y1 - y0)) * ph
        label = _fmt(10**t) if plot.logy else _fmt(t)
        out.append(f'<line x1="{left}" y1="{Y:.1f}" x2="{left + pw}" y2="{Y:.1f}" stroke="#eee"/>')
        out.append(f'<text x="{left - 6}" y="{Y + 4:.1f}" text-anchor="end">{label}</text>')
    out.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    if plot.xlabel:
        out.append(f'<text x="{left + pw / 2:.1f}" y="{H - 12}" text-anchor="middle">{escape(plot.xlabel)}</text>')
    if plot.ylabel:
        cy = top + ph / 2
        out.append(f'<text x="16" y="{cy:.1f}" text-anchor="middle" '
                   f'transform="rotate(-90 16 {cy:.1f})">{escape(plot.ylabel)}</text>')
    for i, s in enumerate(plot.series):
        color = s.color or PALETTE[i % len(PALETTE)]
        pts = [(px(a), py(b)) for a, b in zip(s.x, s.y)
               if math.isfinite(a) and math.isfinite(b) and (b > 0 or not plot.logy)]
        if s.markers:
            out += [f'<circle cx="{a:.2f}" cy="{b:.2f}" r="2.5" fill="{color}"/>' for a, b in pts]
        elif pts:
            path = " ".join(f"{a:.2f},{b:.2f}" for a, b in pts)
            out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.2"/>')
        if s.label:
            ly = top + 16 + 16 * i
            out.append(f'<rect x="{left + pw - 150}" y="{ly - 9}" width="10" height="10" fill="{color}"/>')
            out.append(f'<text x="{left + pw - 135}" y="{ly}">{escape(s.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
