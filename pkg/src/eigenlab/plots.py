"""Self-contained SVG log-log plots for sweep series.

No plotting dependency: the emitted SVG carries inline styles only, uses
log10 axes, and is deterministic byte-for-byte for a given series. Each
plot shows the data points, the fitted power law, and (when a reference
exponent is known) a dashed guide line of the reference slope through
the data centroid; both slopes are labeled to 3 decimals.
"""

from __future__ import annotations

import math

from .errors import UsageError

_WIDTH, _HEIGHT = 640.0, 480.0
_LEFT, _RIGHT, _TOP, _BOTTOM = 72.0, 24.0, 48.0, 56.0


def _nice_ticks(lo: float, hi: float, target: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / target
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 5.0, 10.0):
        if raw <= mult * mag:
            step = mult * mag
            break
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(t) < 1e-12 else t)
        t += step
    return ticks


def _fmt_tick(t: float) -> str:
    return f"{t:.4g}"


class _Canvas:
    """Maps data coordinates to SVG pixels and accumulates elements."""

    def __init__(self, xlo, xhi, ylo, yhi):
        self.xlo, self.xhi, self.ylo, self.yhi = xlo, xhi, ylo, yhi
        self.parts: list[str] = []

    def px(self, x: float) -> float:
        span = self.xhi - self.xlo
        frac = (x - self.xlo) / span if span else 0.5
        return _LEFT + frac * (_WIDTH - _LEFT - _RIGHT)

    def py(self, y: float) -> float:
        span = self.yhi - self.ylo
        frac = (y - self.ylo) / span if span else 0.5
        return _HEIGHT - _BOTTOM - frac * (_HEIGHT - _TOP - _BOTTOM)

    def line(self, x0, y0, x1, y1, style):
        self.parts.append(
            f'<line x1="{self.px(x0):.2f}" y1="{self.py(y0):.2f}" '
            f'x2="{self.px(x1):.2f}" y2="{self.py(y1):.2f}" style="{style}"/>')

    def circle(self, x, y, r, style):
        self.parts.append(
            f'<circle cx="{self.px(x):.2f}" cy="{self.py(y):.2f}" '
            f'r="{r}" style="{style}"/>')

    def text(self, px, py, s, style, anchor="start"):
        self.parts.append(
            f'<text x="{px:.2f}" y="{py:.2f}" text-anchor="{anchor}" '
            f'style="{style}">{s}</text>')


def loglog_svg(points, title: str, fitted_exponent: float | None = None,
               reference: float | None = None) -> str:
    """One log-log scatter with fitted and reference lines.

    ``points`` are (lambda, value) pairs with positive entries; pairs
    with nonpositive values are dropped (failed sweep cells).
    """
    pts = [(math.log10(l), math.log10(v)) for l, v in points
           if l > 0 and v > 0 and math.isfinite(v)]
    if not pts:
        raise UsageError(f"plot {title!r}: no positive data points")
    xs = [x for x, _ in pts]
    ys = [y for _, y in pts]
    xlo, xhi = min(xs), max(xs)
    ylo, yhi = min(ys), max(ys)
    xpad = 0.05 * (xhi - xlo) if xhi > xlo else 0.5
    ypad = 0.05 * (yhi - ylo) if yhi > ylo else 0.5
    cv = _Canvas(xlo - xpad, xhi + xpad, ylo - ypad, yhi + ypad)

    axis = "stroke:#333;stroke-width:1"
    grid = "stroke:#ddd;stroke-width:0.5"
    tick_text = "font:11px sans-serif;fill:#333"
    for t in _nice_ticks(cv.xlo, cv.xhi):
        cv.line(t, cv.ylo, t, cv.yhi, grid)
        cv.text(cv.px(t), _HEIGHT - _BOTTOM + 16.0, _fmt_tick(t), tick_text,
                anchor="middle")
    for t in _nice_ticks(cv.ylo, cv.yhi):
        cv.line(cv.xlo, t, cv.xhi, t, grid)
        cv.text(_LEFT - 8.0, cv.py(t) + 4.0, _fmt_tick(t), tick_text,
                anchor="end")

    xbar = sum(xs) / len(xs)
    ybar = sum(ys) / len(ys)
    if reference is not None:
        style = "stroke:#999;stroke-width:1.5;stroke-dasharray:6 4"
        cv.line(cv.xlo, ybar + reference * (cv.xlo - xbar),
                cv.xhi, ybar + reference * (cv.xhi - xbar), style)
    if fitted_exponent is not None:
        intercept = ybar - fitted_exponent * xbar
        style = "stroke:#1f6fb2;stroke-width:1.5"
        cv.line(cv.xlo, intercept + fitted_exponent * cv.xlo,
                cv.xhi, intercept + fitted_exponent * cv.xhi, style)
    for x, y in pts:
        cv.circle(x, y, 3.5, "fill:#1f6fb2;stroke:#fff;stroke-width:0.8")

    frame = (f'<rect x="{_LEFT:.2f}" y="{_TOP:.2f}" '
             f'width="{_WIDTH - _LEFT - _RIGHT:.2f}" '
             f'height="{_HEIGHT - _TOP - _BOTTOM:.2f}" '
             f'style="fill:none;{axis}"/>')
    label = "font:12px sans-serif;fill:#333"
    legend = []
    if fitted_exponent is not None:
        legend.append((f"fit slope: {fitted_exponent:.3f}", "#1f6fb2"))
    if reference is not None:
        legend.append((f"reference: {reference:.3f}", "#999"))
    legend_parts = []
    for i, (s, color) in enumerate(legend):
        legend_parts.append(
            f'<text x="{_WIDTH - _RIGHT - 8:.2f}" y="{_TOP + 18 + 16 * i:.2f}" '
            f'text-anchor="end" style="font:12px sans-serif;fill:{color}">{s}</text>')

    return "\n".join([
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH:.0f}" '
        f'height="{_HEIGHT:.0f}" viewBox="0 0 {_WIDTH:.0f} {_HEIGHT:.0f}">',
        f'<rect width="{_WIDTH:.0f}" height="{_HEIGHT:.0f}" style="fill:#fff"/>',
        f'<text x="{_LEFT:.2f}" y="{_TOP - 16.0:.2f}" '
        f'style="font:14px sans-serif;fill:#111">{title}</text>',
        *cv.parts,
        frame,
        f'<text x="{(_LEFT + _WIDTH - _RIGHT) / 2:.2f}" '
        f'y="{_HEIGHT - 12.0:.2f}" text-anchor="middle" style="{label}">'
        'log10 lambda</text>',
        f'<text x="16" y="{(_TOP + _HEIGHT - _BOTTOM) / 2:.2f}" '
        f'text-anchor="middle" style="{label}" '
        f'transform="rotate(-90 16 {(_TOP + _HEIGHT - _BOTTOM) / 2:.2f})">'
        'log10 value</text>',
        *legend_parts,
        "</svg>",
        "",
    ])
