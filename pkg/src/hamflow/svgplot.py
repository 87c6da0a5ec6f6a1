"""Tiny SVG line-plot writer.

Plots are polyline primitives with plain axes, built as strings, so the
output is self-contained, deterministic, and diffable.  Nothing here
knows about fields or flows; callers pass bare (x, y) series.
"""

from __future__ import annotations

import math
from typing import List, Optional, Sequence, Tuple

_PALETTE = ("#1f6feb", "#d1242f", "#2da44e", "#bf3989", "#9a6700", "#6639ba")

_W, _H = 720, 480
_ML, _MR, _MT, _MB = 64, 16, 28, 44   # margins: left, right, top, bottom


def _fmt(v: float) -> str:
    # fixed sub-pixel precision keeps files small and byte-stable
    return f"{v:.2f}"


def _tick_label(v: float) -> str:
    if v == 0:
        return "0"
    a = abs(v)
    if 1e-3 <= a < 1e5:
        s = f"{v:.6g}"
    else:
        s = f"{v:.3e}"
    return s


def _nice_ticks(lo: float, hi: float, n: int = 5) -> List[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / max(n - 1, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        step = mult * mag
        if step >= raw - 1e-12 * mag:
            break
    first = math.ceil(lo / step - 1e-9) * step
    ticks = []
    v = first
    while v <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(v) < 1e-12 * step else v)
        v += step
    return ticks or [lo]


class LinePlot:
    """Accumulates named series, then renders one SVG document."""

    def __init__(self, title: str = "", x_label: str = "", y_label: str = "",
                 log_y: bool = False):
        self.title = title
        self.x_label = x_label
        self.y_label = y_label
        self.log_y = log_y
        self.series: List[Tuple[str, Sequence[float], Sequence[float]]] = []

    def add(self, name: str, xs: Sequence[float], ys: Sequence[float]):
        xs = [float(v) for v in xs]
        ys = [float(v) for v in ys]
        if len(xs) != len(ys):
            raise ValueError("series coordinates must pair up")
        if self.log_y and any(v <= 0 for v in ys):
            raise ValueError("log-scale plots need positive values")
        self.series.append((name, xs, ys))
        return self

    # -- rendering ----------------------------------------------------------

    def _bounds(self):
        xs = [v for _, sx, _ in self.series for v in sx]
        ys = [v for _, _, sy in self.series for v in sy]
        if not xs:
            raise ValueError("nothing to plot")
        x_lo, x_hi = min(xs), max(xs)
        y_lo, y_hi = min(ys), max(ys)
        if self.log_y:
            y_lo, y_hi = math.log10(y_lo), math.log10(y_hi)
        if x_hi == x_lo:
            x_lo, x_hi = x_lo - 0.5, x_hi + 0.5
        if y_hi == y_lo:
            y_lo, y_hi = y_lo - 0.5, y_hi + 0.5
        pad = 0.04 * (y_hi - y_lo)
        return x_lo, x_hi, y_lo - pad, y_hi + pad

    def render(self) -> str:
        if not self.series:
            raise ValueError("nothing to plot")
        x_lo, x_hi, y_lo, y_hi = self._bounds()
        pw = _W - _ML - _MR
        ph = _H - _MT - _MB

        def px(x):
            return _ML + pw * (x - x_lo) / (x_hi - x_lo)

        def py(y):
            yy = math.log10(y) if self.log_y else y
            return _MT + ph * (1.0 - (yy - y_lo) / (y_hi - y_lo))

        out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" '
               f'height="{_H}" viewBox="0 0 {_W} {_H}">',
               f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
               f'<rect x="{_ML}" y="{_MT}" width="{pw}" height="{ph}" '
               f'fill="none" stroke="#444" stroke-width="1"/>']
        font = 'font-family="monospace" font-size="11" fill="#222"'

        for tx in _nice_ticks(x_lo, x_hi):
            X = px(tx)
            out.append(f'<line x1="{_fmt(X)}" y1="{_MT + ph}" x2="{_fmt(X)}" '
                       f'y2="{_MT + ph + 4}" stroke="#444"/>')
            out.append(f'<text x="{_fmt(X)}" y="{_MT + ph + 16}" {font} '
                       f'text-anchor="middle">{_tick_label(tx)}</text>')
        for ty in _nice_ticks(y_lo, y_hi):
            Y = _MT + ph * (1.0 - (ty - y_lo) / (y_hi - y_lo))
            label = 10.0 ** ty if self.log_y else ty
            out.append(f'<line x1="{_ML - 4}" y1="{_fmt(Y)}" x2="{_ML}" '
                       f'y2="{_fmt(Y)}" stroke="#444"/>')
            out.append(f'<text x="{_ML - 7}" y="{_fmt(Y + 3.5)}" {font} '
                       f'text-anchor="end">{_tick_label(label)}</text>')

        for i, (name, xs, ys) in enumerate(self.series):
            color = _PALETTE[i % len(_PALETTE)]
            pts = " ".join(f"{_fmt(px(x))},{_fmt(py(y))}"
                           for x, y in zip(xs, ys))
            out.append(f'<polyline points="{pts}" fill="none" '
                       f'stroke="{color}" stroke-width="1.5"/>')
            if name:
                ly = _MT + 14 + 14 * i
                out.append(f'<line x1="{_ML + pw - 150}" y1="{ly - 4}" '
                           f'x2="{_ML + pw - 130}" y2="{ly - 4}" '
                           f'stroke="{color}" stroke-width="2"/>')
                out.append(f'<text x="{_ML + pw - 124}" y="{ly}" {font}>'
                           f'{name}</text>')

        if self.title:
            out.append(f'<text x="{_W // 2}" y="{_MT - 10}" {font} '
                       f'text-anchor="middle">{self.title}</text>')
        if self.x_label:
            out.append(f'<text x="{_ML + pw // 2}" y="{_H - 10}" {font} '
                       f'text-anchor="middle">{self.x_label}</text>')
        if self.y_label:
            out.append(f'<text x="14" y="{_MT + ph // 2}" {font} '
                       f'text-anchor="middle" '
                       f'transform="rotate(-90 14 {_MT + ph // 2})">'
                       f'{self.y_label}</text>')
        out.append("</svg>")
        return "\n".join(out) + "\n"

    def write(self, path, comment: Optional[str] = None) -> None:
        svg = self.render()
        if comment:
            head, rest = svg.split("\n", 1)
            svg = head + f"\n<!-- {comment} -->\n" + rest
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(svg)
