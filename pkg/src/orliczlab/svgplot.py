"""Tiny deterministic SVG line plots.

Hand-rolled so that identical input produces byte-identical output (no
timestamps, ids, or library version strings in the file).
"""

from __future__ import annotations

import math

__all__ = ["line_plot_svg"]

_W, _H = 640, 420
_ML, _MR, _MT, _MB = 70, 20, 30, 50


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def _ticks(lo: float, hi: float, n: int = 5):
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        return [lo]
    span = hi - lo
    step = 10 ** math.floor(math.log10(span / n))
    for mult in (1, 2, 5, 10):
        if span / (step * mult) <= n:
            step *= mult
            break
    first = math.ceil(lo / step) * step
    out = []
    t = first
    while t <= hi + 1e-12 * span:
        out.append(t)
        t += step
    return out or [lo]


def line_plot_svg(xs, ys, title: str, xlabel: str, ylabel: str,
                  logx: bool = False, logy: bool = False) -> str:
    pts = [(float(x), float(y)) for x, y in zip(xs, ys)
           if math.isfinite(x) and math.isfinite(y)
           and (not logx or x > 0) and (not logy or y > 0)]
    if not pts:
        raise ValueError("no plottable points in the series")

    def tx(v):
        return math.log10(v) if logx else v

    def ty(v):
        return math.log10(v) if logy else v

    xv = [tx(p[0]) for p in pts]
    yv = [ty(p[1]) for p in pts]
    x0, x1 = min(xv), max(xv)
    y0, y1 = min(yv), max(yv)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pw = _W - _ML - _MR
    ph = _H - _MT - _MB

    def px(v):
        return _ML + (tx(v) - x0) / (x1 - x0) * pw

    def py(v):
        return _MT + ph - (ty(v) - y0) / (y1 - y0) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W // 2}" y="18" text-anchor="middle" '
        f'font-family="monospace" font-size="14">{title}</text>',
        f'<rect x="{_ML}" y="{_MT}" width="{pw}" height="{ph}" fill="none" '
        'stroke="black" stroke-width="1"/>',
    ]
    for t in _ticks(x0, x1):
        X = _ML + (t - x0) / (x1 - x0) * pw
        lab = _fmt(10**t) if logx else _fmt(t)
        parts.append(f'<line x1="{X:.2f}" y1="{_MT + ph}" x2="{X:.2f}" '
                     f'y2="{_MT + ph + 5}" stroke="black"/>')
        parts.append(f'<text x="{X:.2f}" y="{_MT + ph + 18}" text-anchor="middle" '
                     f'font-family="monospace" font-size="10">{lab}</text>')
    for t in _ticks(y0, y1):
        Y = _MT + ph - (t - y0) / (y1 - y0) * ph
        lab = _fmt(10**t) if logy else _fmt(t)
        parts.append(f'<line x1="{_ML - 5}" y1="{Y:.2f}" x2="{_ML}" '
                     f'y2="{Y:.2f}" stroke="black"/>')
        parts.append(f'<text x="{_ML - 8}" y="{Y + 3:.2f}" text-anchor="end" '
                     f'font-family="monospace" font-size="10">{lab}</text>')
    parts.append(f'<text x="{_ML + pw // 2}" y="{_H - 10}" text-anchor="middle" '
                 f'font-family="monospace" font-size="12">{xlabel}</text>')
    parts.append(f'<text x="16" y="{_MT + ph // 2}" text-anchor="middle" '
                 f'font-family="monospace" font-size="12" '
                 f'transform="rotate(-90 16 {_MT + ph // 2})">{ylabel}</text>')
    path = " ".join(f"{'M' if i == 0 else 'L'}{px(p[0]):.2f},{py(p[1]):.2f}"
                    for i, p in enumerate(pts))
    parts.append(f'<path d="{path}" fill="none" stroke="#1f77b4" stroke-width="1.5"/>')
    for p in pts:
        parts.append(f'<circle cx="{px(p[0]):.2f}" cy="{py(p[1]):.2f}" r="2.5" '
                     'fill="#1f77b4"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
