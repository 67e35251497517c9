"""Tiny static SVG line plots for run directories."""
from __future__ import annotations

import math
from html import escape
from pathlib import Path

COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf")


def _ticks(lo: float, hi: float, n: int = 5):
    if hi <= lo:
        hi = lo + 1.0
    return [lo + (hi - lo) * k / (n - 1) for k in range(n)]


def line_plot(series, title: str = "", xlabel: str = "", ylabel: str = "",
              logx: bool = False, logy: bool = False, width: int = 640,
              height: int = 420) -> str:
    """``series`` is a list of (xs, ys, label); non-finite points are skipped."""
    tx = (lambda v: math.log10(v)) if logx else (lambda v: v)
    ty = (lambda v: math.log10(v)) if logy else (lambda v: v)
    pts = []
    for xs, ys, label in series:
        clean = []
        for x, y in zip(xs, ys):
            try:
                x, y = float(x), float(y)
            except (TypeError, ValueError):
                continue
            if not (math.isfinite(x) and math.isfinite(y)):
                continue
            if (logx and x <= 0) or (logy and y <= 0):
                continue
            clean.append((tx(x), ty(y)))
        pts.append((clean, label))
    allx = [p[0] for c, _ in pts for p in c] or [0.0, 1.0]
    ally = [p[1] for c, _ in pts for p in c] or [0.0, 1.0]
    x0, x1 = min(allx), max(allx)
    y0, y1 = min(ally), max(ally)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    ml, mr, mt, mb = 70, 20, 40, 50
    pw, ph = width - ml - mr, height - mt - mb
    sx = lambda x: ml + (x - x0) / (x1 - x0) * pw
    sy = lambda y: mt + ph - (y - y0) / (y1 - y0) * ph
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="sans-serif" font-size="12">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
           f'<text x="{width / 2}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
           f'<text x="{ml + pw / 2}" y="{height - 10}" text-anchor="middle">{escape(xlabel)}</text>',
           f'<text x="16" y="{mt + ph / 2}" text-anchor="middle" '
           f'transform="rotate(-90 16 {mt + ph / 2})">{escape(ylabel)}</text>']
    fmt = lambda v, lg: f"1e{v:.1f}" if lg else f"{v:.4g}"
    for t in _ticks(x0, x1):
        out.append(f'<text x="{sx(t):.1f}" y="{mt + ph + 16}" text-anchor="middle">{fmt(t, logx)}</text>')
    for t in _ticks(y0, y1):
        out.append(f'<text x="{ml - 6}" y="{sy(t) + 4:.1f}" text-anchor="end">{fmt(t, logy)}</text>')
    for k, (clean, label) in enumerate(pts):
        col = COLORS[k % len(COLORS)]
        if clean:
            path = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in clean)
            out.append(f'<polyline fill="none" stroke="{col}" stroke-width="1.5" points="{path}"/>')
            if len(clean) < 30:
                out.extend(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3" fill="{col}"/>'
                           for x, y in clean)
        out.append(f'<text x="{ml + pw - 8}" y="{mt + 16 + 16 * k}" text-anchor="end" '
                   f'fill="{col}">{escape(str(label))}</text>')
    out.append("</svg>")
    return "\n".join(out)


def write_plot(path: str | Path, series, **kw) -> None:
    Path(path).write_text(line_plot(series, **kw))
