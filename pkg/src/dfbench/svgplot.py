"""Minimal deterministic SVG emitter for log-log roofline charts."""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 800, 600
LEFT, RIGHT, TOP, BOTTOM = 90, 30, 50, 70
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _n(x: float) -> str:
    return f"{x:.2f}"


class LogAxes:
    def __init__(self, xmin, xmax, ymin, ymax):
        self.lx0, self.lx1 = math.floor(math.log10(xmin)), math.ceil(math.log10(xmax))
        self.ly0, self.ly1 = math.floor(math.log10(ymin)), math.ceil(math.log10(ymax))
        if self.lx1 == self.lx0:
            self.lx1 += 1
        if self.ly1 == self.ly0:
            self.ly1 += 1

    def x(self, v):
        f = (math.log10(v) - self.lx0) / (self.lx1 - self.lx0)
        return LEFT + f * (WIDTH - LEFT - RIGHT)

    def y(self, v):
        f = (math.log10(v) - self.ly0) / (self.ly1 - self.ly0)
        return HEIGHT - BOTTOM - f * (HEIGHT - TOP - BOTTOM)


def roofline_svg(title: str, peak: float, bandwidth: float, points) -> str:
    """Render the bandwidth slope, the compute ceiling and one marker per point.

    ``points`` are RooflinePoints; markers sit at (ai, attainable) and zero-AI
    points are listed in the legend only, since log axes cannot show them.
    """
    ridge = peak / bandwidth
    ais = [p.ai for p in points if p.ai > 0]
    xmin = min([ridge / 100.0] + [a / 2 for a in ais])
    xmax = max([ridge * 100.0] + [a * 2 for a in ais])
    ymin = min(bandwidth * xmin, peak / 1e3)
    ax = LogAxes(xmin, xmax, ymin, peak * 2)
    x0, x1 = ax.x(10.0**ax.lx0), ax.x(10.0**ax.lx1)
    y0, y1 = ax.y(10.0**ax.ly0), ax.y(10.0**ax.ly1)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.2f}" y="28" text-anchor="middle" font-family="sans-serif" font-size="18">{escape(title)}</text>',
        '<g stroke="#dddddd" stroke-width="1">',
    ]
    for d in range(ax.lx0, ax.lx1 + 1):
        xv = ax.x(10.0**d)
        out.append(f'<line x1="{_n(xv)}" y1="{_n(y0)}" x2="{_n(xv)}" y2="{_n(y1)}"/>')
    for d in range(ax.ly0, ax.ly1 + 1):
        yv = ax.y(10.0**d)
        out.append(f'<line x1="{_n(x0)}" y1="{_n(yv)}" x2="{_n(x1)}" y2="{_n(yv)}"/>')
    out.append("</g>")
    out.append(f'<rect x="{_n(x0)}" y="{_n(y1)}" width="{_n(x1 - x0)}" height="{_n(y0 - y1)}" fill="none" stroke="black"/>')
    out.append('<g font-family="sans-serif" font-size="12">')
    for d in range(ax.lx0, ax.lx1 + 1):
        out.append(f'<text x="{_n(ax.x(10.0**d))}" y="{_n(y0 + 18)}" text-anchor="middle">1e{d}</text>')
    for d in range(ax.ly0, ax.ly1 + 1):
        out.append(f'<text x="{_n(x0 - 8)}" y="{_n(ax.y(10.0**d) + 4)}" text-anchor="end">1e{d}</text>')
    out.append(f'<text x="{_n((x0 + x1) / 2)}" y="{HEIGHT - 20}" text-anchor="middle">arithmetic intensity (FLOP/byte)</text>')
    out.append(f'<text x="20" y="{_n((y0 + y1) / 2)}" text-anchor="middle" transform="rotate(-90 20 {_n((y0 + y1) / 2)})">attainable FLOP/s</text>')
    out.append("</g>")

    xl, xr = 10.0**ax.lx0, 10.0**ax.lx1
    slope_start = max(xl, 10.0**ax.ly0 / bandwidth)
    out.append(
        f'<polyline fill="none" stroke="black" stroke-width="2" points="'
        f'{_n(ax.x(slope_start))},{_n(ax.y(bandwidth * slope_start))} {_n(ax.x(ridge))},{_n(ax.y(peak))} {_n(ax.x(xr))},{_n(ax.y(peak))}"/>'
    )
    out.append(
        f'<text x="{_n(ax.x(ridge) + 6)}" y="{_n(ax.y(peak) - 8)}" font-family="sans-serif" font-size="11">'
        f'ridge {escape(repr(ridge))} FLOP/B</text>'
    )

    legend_y = TOP + 16
    for i, p in enumerate(points):
        color = COLORS[i % len(COLORS)]
        label = escape(p.label or f"point {i + 1}")
        tip = f"{label}: ai={p.ai!r} attainable={p.attainable_flops!r} achieved={p.achieved_flops!r} {p.regime}"
        if p.ai > 0 and p.attainable_flops > 0:
            px, py = ax.x(p.ai), ax.y(p.attainable_flops)
            out.append(f'<circle cx="{_n(px)}" cy="{_n(py)}" r="6" fill="{color}" stroke="black"><title>{tip}</title></circle>')
        out.append(f'<circle cx="{_n(x1 - 230)}" cy="{_n(legend_y - 4)}" r="4" fill="{color}"/>')
        out.append(
            f'<text x="{_n(x1 - 220)}" y="{_n(legend_y)}" font-family="sans-serif" font-size="11">{label} ({p.regime})</text>'
        )
        legend_y += 16
    out.append("</svg>")
    return "\n".join(out) + "\n"
