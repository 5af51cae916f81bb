"""Minimal hand-written SVG charts: line plots and a confusion heat grid.

Output carries no timestamps or random ids, so identical inputs give
identical bytes.
"""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
W, H = 480, 360
LEFT, RIGHT, TOP, BOTTOM = 60, 20, 36, 48


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def line_chart(series, title: str, xlabel: str, ylabel: str, *, xlim=None, ylim=None, diagonal=False) -> str:
    """``series`` is a list of ``(label, xs, ys)``."""
    xs_all = np.concatenate([np.asarray(s[1], dtype=float) for s in series]) if series else np.zeros(1)
    ys_all = np.concatenate([np.asarray(s[2], dtype=float) for s in series]) if series else np.zeros(1)
    x0, x1 = xlim or (float(xs_all.min()), float(xs_all.max()))
    y0, y1 = ylim or (float(ys_all.min()), float(ys_all.max()))
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    pw, ph = W - LEFT - RIGHT, H - TOP - BOTTOM

    def sx(v):
        return LEFT + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return TOP + ph - (v - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
        f'<text x="{LEFT + pw / 2}" y="{H - 10}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
        f'<text x="14" y="{TOP + ph / 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 14 {TOP + ph / 2})">{escape(ylabel)}</text>',
    ]
    for frac in (0.0, 0.5, 1.0):
        xv, yv = x0 + frac * (x1 - x0), y0 + frac * (y1 - y0)
        out.append(f'<text x="{_fmt(sx(xv))}" y="{TOP + ph + 16}" text-anchor="middle" font-size="10">{xv:.3g}</text>')
        out.append(f'<text x="{LEFT - 4}" y="{_fmt(sy(yv) + 3)}" text-anchor="end" font-size="10">{yv:.3g}</text>')
    if diagonal:
        out.append(
            f'<line x1="{_fmt(sx(x0))}" y1="{_fmt(sy(y0))}" x2="{_fmt(sx(x1))}" y2="{_fmt(sy(y1))}" '
            'stroke="gray" stroke-dasharray="4 3"/>'
        )
    for i, (label, xs, ys) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{_fmt(sx(a))},{_fmt(sy(b))}" for a, b in zip(xs, ys))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = TOP + 14 + 14 * i
        out.append(f'<line x1="{W - RIGHT - 110}" y1="{ly - 4}" x2="{W - RIGHT - 92}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{W - RIGHT - 88}" y="{ly}" font-size="10">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def confusion_grid(cm, title: str = "Confusion matrix", class_names=None) -> str:
    cm = np.asarray(cm)
    c = cm.shape[0]
    names = list(class_names) if class_names else [str(k) for k in range(c)]
    cell = min((W - LEFT - RIGHT) // c, (H - TOP - BOTTOM) // c)
    peak = max(int(cm.max()), 1)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
    ]
    for i in range(c):
        for j in range(c):
            shade = 255 - int(round(200 * cm[i, j] / peak))
            x, y = LEFT + j * cell, TOP + i * cell
            out.append(f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="rgb({shade},{shade},255)" stroke="white"/>')
            out.append(f'<text x="{x + cell / 2}" y="{y + cell / 2 + 4}" text-anchor="middle" font-size="12">{int(cm[i, j])}</text>')
        out.append(f'<text x="{LEFT - 4}" y="{TOP + i * cell + cell / 2 + 4}" text-anchor="end" font-size="10">{escape(names[i])}</text>')
        out.append(f'<text x="{LEFT + i * cell + cell / 2}" y="{TOP + c * cell + 14}" text-anchor="middle" font-size="10">{escape(names[i])}</text>')
    out.append(f'<text x="{LEFT + c * cell / 2}" y="{TOP + c * cell + 32}" text-anchor="middle" font-size="12">predicted</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
