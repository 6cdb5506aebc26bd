"""Minimal log-log line plots written directly as SVG."""
from __future__ import annotations

import math
from typing import Sequence
from xml.sax.saxutils import escape

__all__ = ["loglog_svg", "write_convergence_svg"]

WIDTH, HEIGHT = 640, 480
MARGIN = dict(left=80, right=170, top=30, bottom=60)
COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"]
GUIDE_COLOR = "#888888"


def _decades(lo: float, hi: float):
    return list(range(math.floor(math.log10(lo)), math.ceil(math.log10(hi)) + 1))


def loglog_svg(
    x: Sequence[float],
    series: dict,
    *,
    guides: Sequence[float] = (1.0, 2.0),
    xlabel: str = "h",
    ylabel: str = "error",
    title: str = "",
) -> str:
    """SVG text of `series` (label -> y values) against `x` on log axes.

    Each entry of `guides` adds a dashed reference line of that slope,
    anchored at the first point of the first series. Non-positive values are
    skipped.
    """
    pts = {k: [(a, b) for a, b in zip(x, v) if a > 0 and b is not None and b > 0]
           for k, v in series.items()}
    xs = [a for a in x if a > 0]
    ys = [b for p in pts.values() for _, b in p]
    if not xs or not ys:
        raise ValueError("nothing to plot")
    x_lo, x_hi = 10 ** math.floor(math.log10(min(xs))), 10 ** math.ceil(math.log10(max(xs)))
    y_lo, y_hi = 10 ** math.floor(math.log10(min(ys))), 10 ** math.ceil(math.log10(max(ys)))
    if x_lo == x_hi:
        x_hi *= 10
    if y_lo == y_hi:
        y_hi *= 10
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(v):
        return MARGIN["left"] + pw * (math.log10(v) - math.log10(x_lo)) / math.log10(x_hi / x_lo)

    def py(v):
        return MARGIN["top"] + ph * (1 - (math.log10(v) - math.log10(y_lo)) / math.log10(y_hi / y_lo))

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    for d in _decades(x_lo, x_hi):
        v = 10.0**d
        out.append(f'<line x1="{px(v):.1f}" y1="{MARGIN["top"]}" x2="{px(v):.1f}" '
                   f'y2="{MARGIN["top"] + ph}" stroke="#eeeeee"/>')
        out.append(f'<text x="{px(v):.1f}" y="{MARGIN["top"] + ph + 18}" '
                   f'text-anchor="middle">1e{d}</text>')
    for d in _decades(y_lo, y_hi):
        v = 10.0**d
        out.append(f'<line x1="{MARGIN["left"]}" y1="{py(v):.1f}" x2="{MARGIN["left"] + pw}" '
                   f'y2="{py(v):.1f}" stroke="#eeeeee"/>')
        out.append(f'<text x="{MARGIN["left"] - 8}" y="{py(v) + 4:.1f}" '
                   f'text-anchor="end">1e{d}</text>')
    out.append(f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" '
               f'fill="none" stroke="black"/>')

    legend_y = MARGIN["top"] + 10
    first = next(iter(pts.values()))
    if first:
        x0, y0 = first[0]
        x1 = min(xs)
        for s in guides:
            y1 = y0 * (x1 / x0) ** s
            out.append(f'<line x1="{px(x0):.1f}" y1="{py(y0):.1f}" x2="{px(x1):.1f}" '
                       f'y2="{py(max(y1, y_lo)):.1f}" stroke="{GUIDE_COLOR}" '
                       f'stroke-dasharray="6,4"/>')
            out.append(f'<text x="{px(x1) + 4:.1f}" y="{py(max(y1, y_lo)):.1f}" '
                       f'fill="{GUIDE_COLOR}">slope {s:g}</text>')
    for i, (label, p) in enumerate(pts.items()):
        color = COLORS[i % len(COLORS)]
        coords = " ".join(f"{px(a):.1f},{py(b):.1f}" for a, b in p)
        out.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="2"/>')
        for a, b in p:
            out.append(f'<circle cx="{px(a):.1f}" cy="{py(b):.1f}" r="3" fill="{color}"/>')
        lx = MARGIN["left"] + pw + 15
        out.append(f'<line x1="{lx}" y1="{legend_y}" x2="{lx + 20}" y2="{legend_y}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 26}" y="{legend_y + 4}">{escape(label)}</text>')
        legend_y += 20

    out.append(f'<text x="{MARGIN["left"] + pw / 2:.1f}" y="{HEIGHT - 15}" '
               f'text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="20" y="{MARGIN["top"] + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 20 {MARGIN["top"] + ph / 2:.1f})">{escape(ylabel)}</text>')
    if title:
        out.append(f'<text x="{MARGIN["left"] + pw / 2:.1f}" y="18" '
                   f'text-anchor="middle">{escape(title)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_convergence_svg(rows, path, title: str = "") -> None:
    """Plot the three error columns of convergence rows against h."""
    h = [r.h for r in rows]
    svg = loglog_svg(
        h,
        {
            "L2 velocity": [r.e_l2_u for r in rows],
            "V velocity": [r.e_v_u for r in rows],
            "L2 pressure": [r.e_l2_p for r in rows],
        },
        title=title,
    )
    with open(path, "w") as fh:
        fh.write(svg)
