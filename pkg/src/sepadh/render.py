"""Minimal deterministic SVG line plots for risk and prevalence curves.

Hand-rolled on purpose: output bytes depend only on the data passed in,
with fixed canvas geometry, a fixed palette, and no timestamps or
generated identifiers, so rendered files are reproducible artifacts.
"""

from __future__ import annotations

import io

_WIDTH = 720
_HEIGHT = 440
_MARGIN_L = 64
_MARGIN_R = 16
_MARGIN_T = 28
_MARGIN_B = 48

PALETTE = ("#1f6fb2", "#c23b22", "#2e8540", "#8a5fbf", "#b8860b",
           "#3c3c3c")


def _fmt(x):
    return format(float(x), ".6g")


def _ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    step = (hi - lo) / (n - 1)
    return [lo + i * step for i in range(n)]


class SvgPlot:
    """A single x-y chart with step or line series and a legend."""

    def __init__(self, title, xlabel, ylabel):
        self.title = title
        self.xlabel = xlabel
        self.ylabel = ylabel
        self.series = []
        self.bands = []

    def add_series(self, xs, ys, label):
        self.series.append((list(map(float, xs)), list(map(float, ys)),
                            label))

    def add_band(self, xs, lo, hi, label):
        self.bands.append((list(map(float, xs)), list(map(float, lo)),
                           list(map(float, hi)), label))

    def _extent(self):
        xs = [x for s in self.series for x in s[0]]
        ys = [y for s in self.series for y in s[1]]
        for b in self.bands:
            xs += b[0]
            ys += b[1] + b[2]
        if not xs:
            xs, ys = [0.0, 1.0], [0.0, 1.0]
        x0, x1 = min(xs), max(xs)
        y0, y1 = min(ys), max(ys)
        if y0 > 0:
            y0 = 0.0
        if y1 <= y0:
            y1 = y0 + 1.0
        y1 *= 1.05
        if x1 <= x0:
            x1 = x0 + 1.0
        return x0, x1, y0, y1

    def render(self):
        x0, x1, y0, y1 = self._extent()
        iw = _WIDTH - _MARGIN_L - _MARGIN_R
        ih = _HEIGHT - _MARGIN_T - _MARGIN_B

        def px(x):
            return _MARGIN_L + iw * (x - x0) / (x1 - x0)

        def py(y):
            return _MARGIN_T + ih * (1.0 - (y - y0) / (y1 - y0))

        buf = io.StringIO()
        buf.write(f'<svg xmlns="http://www.w3.org/2000/svg" '
                  f'width="{_WIDTH}" height="{_HEIGHT}" '
                  f'viewBox="0 0 {_WIDTH} {_HEIGHT}">\n')
        buf.write(f'<rect width="{_WIDTH}" height="{_HEIGHT}" '
                  f'fill="#ffffff"/>\n')
        buf.write(f'<text x="{_WIDTH // 2}" y="18" text-anchor="middle" '
                  f'font-family="sans-serif" font-size="14">'
                  f'{self.title}</text>\n')
        # axes
        ax0, ay0 = px(x0), py(y0)
        ax1, ay1 = px(x1), py(y1)
        buf.write(f'<line x1="{_fmt(ax0)}" y1="{_fmt(ay0)}" '
                  f'x2="{_fmt(ax1)}" y2="{_fmt(ay0)}" stroke="#333"/>\n')
        buf.write(f'<line x1="{_fmt(ax0)}" y1="{_fmt(ay0)}" '
                  f'x2="{_fmt(ax0)}" y2="{_fmt(ay1)}" stroke="#333"/>\n')
        for tx in _ticks(x0, x1):
            buf.write(f'<text x="{_fmt(px(tx))}" y="{_fmt(ay0 + 16)}" '
                      f'text-anchor="middle" font-family="sans-serif" '
                      f'font-size="10">{_fmt(tx)}</text>\n')
        for ty in _ticks(y0, y1):
            buf.write(f'<text x="{_fmt(ax0 - 6)}" y="{_fmt(py(ty) + 3)}" '
                      f'text-anchor="end" font-family="sans-serif" '
                      f'font-size="10">{_fmt(ty)}</text>\n')
        buf.write(f'<text x="{_WIDTH // 2}" y="{_HEIGHT - 10}" '
                  f'text-anchor="middle" font-family="sans-serif" '
                  f'font-size="12">{self.xlabel}</text>\n')
        buf.write(f'<text x="14" y="{_HEIGHT // 2}" text-anchor="middle" '
                  f'font-family="sans-serif" font-size="12" '
                  f'transform="rotate(-90 14 {_HEIGHT // 2})">'
                  f'{self.ylabel}</text>\n')
        # confidence bands first, under the lines
        for i, (xs, lo, hi, _label) in enumerate(self.bands):
            color = PALETTE[i % len(PALETTE)]
            pts = [f"{_fmt(px(x))},{_fmt(py(v))}" for x, v in zip(xs, lo)]
            pts += [f"{_fmt(px(x))},{_fmt(py(v))}"
                    for x, v in zip(reversed(xs), reversed(hi))]
            buf.write(f'<polygon points="{" ".join(pts)}" fill="{color}" '
                      f'fill-opacity="0.15" stroke="none"/>\n')
        for i, (xs, ys, label) in enumerate(self.series):
            color = PALETTE[i % len(PALETTE)]
            pts = " ".join(f"{_fmt(px(x))},{_fmt(py(y))}"
                           for x, y in zip(xs, ys))
            buf.write(f'<polyline points="{pts}" fill="none" '
                      f'stroke="{color}" stroke-width="1.8"/>\n')
            ly = _MARGIN_T + 14 + 16 * i
            lx = _MARGIN_L + 12
            buf.write(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 22}" '
                      f'y2="{ly - 4}" stroke="{color}" '
                      f'stroke-width="1.8"/>\n')
            buf.write(f'<text x="{lx + 28}" y="{ly}" '
                      f'font-family="sans-serif" font-size="11">'
                      f'{label}</text>\n')
        buf.write("</svg>\n")
        return buf.getvalue()

    def write(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.render())


def risk_plot(title, curves):
    """Risk curves (with any attached bands) on one chart."""
    plot = SvgPlot(title, "interval", "cumulative incidence")
    for curve in curves:
        if curve.lo is not None:
            plot.add_band(curve.ks, curve.lo, curve.hi,
                          curve.label or "band")
    for curve in curves:
        plot.add_series(curve.ks, curve.risk, curve.label or "risk")
    return plot


def prevalence_plot(title, curves):
    plot = SvgPlot(title, "interval", "prevalence")
    for curve in curves:
        plot.add_series(curve.ks, curve.value,
                        curve.label or curve.variable)
    return plot
