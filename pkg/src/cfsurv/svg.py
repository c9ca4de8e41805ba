"""Minimal SVG line charts."""

from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#2ca02c", "#d62728", "#000000", "#ff7f0e", "#9467bd")


def line_chart(series, path, *, title="", xlabel="t", ylabel="value", width=720, height=440):
    """Write a line chart to ``path``.

    ``series`` is a list of dicts with keys ``x``, ``y`` and optionally
    ``label``, ``color``, ``width``, ``dash`` and ``opacity``. Series without
    a label are left out of the legend.
    """
    ml, mr, mt, mb = 60, 150, 30, 45
    xs = np.concatenate([np.asarray(s["x"], float) for s in series])
    ys = np.concatenate([np.asarray(s["y"], float) for s in series])
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pw, ph = width - ml - mr, height - mt - mb

    def px(x):
        return ml + (x - x0) / (x1 - x0) * pw

    def py(y):
        return mt + (y1 - y) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
    ]
    for k in range(5):
        xv = x0 + k * (x1 - x0) / 4
        yv = y0 + k * (y1 - y0) / 4
        out.append(f'<text x="{px(xv):.1f}" y="{mt + ph + 15}" text-anchor="middle">{xv:.3g}</text>')
        out.append(f'<text x="{ml - 5}" y="{py(yv) + 4:.1f}" text-anchor="end">{yv:.3g}</text>')
    if y0 < 0 < y1:
        out.append(f'<line x1="{ml}" x2="{ml + pw}" y1="{py(0):.1f}" y2="{py(0):.1f}" stroke="#bbb"/>')
    out.append(f'<text x="{ml + pw / 2}" y="{height - 8}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(
        f'<text x="14" y="{mt + ph / 2}" text-anchor="middle" '
        f'transform="rotate(-90 14 {mt + ph / 2})">{escape(ylabel)}</text>'
    )
    if title:
        out.append(f'<text x="{ml + pw / 2}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>')

    legend_y = mt + 10
    for i, s in enumerate(series):
        color = s.get("color", PALETTE[i % len(PALETTE)])
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(s["x"], s["y"]))
        dash = ' stroke-dasharray="6,4"' if s.get("dash") else ""
        out.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" '
            f'stroke-width="{s.get("width", 1.5)}" stroke-opacity="{s.get("opacity", 1)}"{dash}/>'
        )
        if s.get("label"):
            lx = ml + pw + 10
            out.append(f'<line x1="{lx}" x2="{lx + 20}" y1="{legend_y}" y2="{legend_y}" stroke="{color}" stroke-width="2"{dash}/>')
            out.append(f'<text x="{lx + 25}" y="{legend_y + 4}">{escape(s["label"])}</text>')
            legend_y += 16
    out.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")
