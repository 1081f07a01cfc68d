"""Minimal hand-written SVG output for CDF plots and trajectory snapshots."""

from __future__ import annotations

from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")
DASHES = ("", "6,3", "2,2", "8,2,2,2")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _polyline(xs, ys, color: str, dash: str = "", width: float = 1.5) -> str:
    pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in zip(xs, ys))
    extra = f' stroke-dasharray="{dash}"' if dash else ""
    return (f'<polyline fill="none" stroke="{color}" stroke-width="{width}"{extra} '
            f'points="{pts}"/>')


def cdf_svg(series: Sequence[tuple[str, np.ndarray, np.ndarray]], title: str = "",
            xlabel: str = "d", width: int = 640, height: int = 420) -> str:
    """One polyline per (label, thresholds, fractions) entry."""
    ml, mr, mt, mb = 60, 180, 30, 45
    pw, ph = width - ml - mr, height - mt - mb
    xmax = max((float(np.max(t)) for _, t, _ in series), default=1.0) or 1.0
    sx = lambda x: ml + pw * x / xmax
    sy = lambda y: mt + ph * (1.0 - y)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<text x="{ml}" y="18" font-size="13">{escape(title)}</text>',
           f'<line x1="{ml}" y1="{sy(0)}" x2="{ml + pw}" y2="{sy(0)}" stroke="black"/>',
           f'<line x1="{ml}" y1="{sy(0)}" x2="{ml}" y2="{sy(1)}" stroke="black"/>']
    for k in range(6):
        y = k / 5
        out.append(f'<text x="{ml - 8}" y="{_fmt(sy(y) + 4)}" font-size="10" '
                   f'text-anchor="end">{y:.1f}</text>')
        x = xmax * k / 5
        out.append(f'<text x="{_fmt(sx(x))}" y="{sy(0) + 15}" font-size="10" '
                   f'text-anchor="middle">{x:.1f}</text>')
    out.append(f'<text x="{ml + pw / 2}" y="{height - 8}" font-size="11" '
               f'text-anchor="middle">{escape(xlabel)}</text>')
    for i, (label, th, fr) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        dash = DASHES[(i // len(PALETTE)) % len(DASHES)]
        out.append(_polyline([sx(x) for x in th], [sy(y) for y in fr], color, dash))
        ly = mt + 14 * i + 8
        out.append(f'<line x1="{ml + pw + 12}" y1="{ly}" x2="{ml + pw + 32}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{ml + pw + 36}" y="{ly + 4}" font-size="10">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def trajectory_svg(occupancy: np.ndarray, resolution: float, origin: tuple[float, float],
                   paths: Sequence[tuple[str, np.ndarray]], scale: float = 25.0) -> str:
    """Occupied cells as grey squares, each path as a coloured polyline."""
    rows, cols = occupancy.shape
    w, h = cols * resolution * scale, rows * resolution * scale
    px = lambda x: (x - origin[0]) * scale
    py = lambda y: h - (y - origin[1]) * scale
    cs = resolution * scale
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(w + 160)}" height="{_fmt(h)}">',
           f'<rect width="{_fmt(w)}" height="{_fmt(h)}" fill="white"/>']
    rr, cc = np.nonzero(occupancy)
    for r, c in zip(rr, cc):
        out.append(f'<rect x="{_fmt(c * cs)}" y="{_fmt(h - (r + 1) * cs)}" width="{_fmt(cs)}" '
                   f'height="{_fmt(cs)}" fill="#999"/>')
    for i, (label, pts) in enumerate(paths):
        color = PALETTE[i % len(PALETTE)]
        pts = np.asarray(pts)
        out.append(_polyline([px(x) for x in pts[:, 0]], [py(y) for y in pts[:, 1]], color, width=2))
        out.append(f'<text x="{_fmt(w + 10)}" y="{20 + 16 * i}" font-size="12" '
                   f'fill="{color}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
