"""Minimal standalone SVG line plots (no plotting dependency)."""

from __future__ import annotations

from xml.sax.saxutils import escape

WIDTH, HEIGHT = 640, 420
MARGIN = 60
COLORS = ("#1f4e79", "#b03a2e", "#1e8449", "#7d3c98")


def _fmt(v):
    return f"{v:.6g}"


def line_plot(path, series, title="", xlabel="", ylabel=""):
    """Write ``series = [(label, xs, ys, style)]`` with style ``"line"`` or ``"points"``."""
    xs_all = [float(x) for _, xs, _, _ in series for x in xs]
    ys_all = [float(y) for _, _, ys, _ in series for y in ys]
    x0, x1 = min(xs_all), max(xs_all)
    y0, y1 = min(ys_all), max(ys_all)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + abs(y0) * 1e-6 + 1e-12
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    def sx(x):
        return MARGIN + (WIDTH - 2 * MARGIN) * (x - x0) / (x1 - x0)

    def sy(y):
        return HEIGHT - MARGIN - (HEIGHT - 2 * MARGIN) * (y - y0) / (y1 - y0)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<line x1="{MARGIN}" y1="{HEIGHT - MARGIN}" x2="{WIDTH - MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<text x="{WIDTH / 2}" y="{MARGIN / 2}" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<text x="{WIDTH / 2}" y="{HEIGHT - 15}" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="15" y="{HEIGHT / 2}" text-anchor="middle" transform="rotate(-90 15 {HEIGHT / 2})">'
        f"{escape(ylabel)}</text>",
    ]
    for i in range(5):
        xv = x0 + (x1 - x0) * i / 4
        yv = y0 + (y1 - y0) * i / 4
        out.append(f'<text x="{sx(xv):.1f}" y="{HEIGHT - MARGIN + 16}" text-anchor="middle">{_fmt(xv)}</text>')
        out.append(f'<text x="{MARGIN - 6}" y="{sy(yv) + 4:.1f}" text-anchor="end">{_fmt(yv)}</text>')
    for idx, (label, xs, ys, style) in enumerate(series):
        color = COLORS[idx % len(COLORS)]
        pts = [(sx(float(x)), sy(float(y))) for x, y in zip(xs, ys)]
        if style == "points":
            out.extend(f'<circle cx="{px:.2f}" cy="{py:.2f}" r="3.5" fill="{color}"/>' for px, py in pts)
        else:
            d = " ".join(f"{px:.2f},{py:.2f}" for px, py in pts)
            out.append(f'<polyline points="{d}" fill="none" stroke="{color}" stroke-width="1.8"/>')
        ly = MARGIN + 16 * idx + 8
        out.append(f'<rect x="{WIDTH - MARGIN - 150}" y="{ly - 8}" width="12" height="4" fill="{color}"/>')
        out.append(f'<text x="{WIDTH - MARGIN - 132}" y="{ly - 2}">{escape(label)}</text>')
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")
