"""Minimal standalone SVG charts.

Output depends only on the input numbers (coordinates are printed with
fixed precision), so identical data gives byte-identical files.
"""

from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=70, right=20, top=40, bottom=60)
PALETTE = ("#3b4cc0", "#b40426", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


def _f(v):
    return f"{v:.2f}"


class _Frame:
    """Maps data coordinates into the plotting area."""

    def __init__(self, xlim, ylim, width=WIDTH, height=HEIGHT):
        self.width, self.height = width, height
        self.x0, self.x1 = MARGIN["left"], width - MARGIN["right"]
        self.y0, self.y1 = height - MARGIN["bottom"], MARGIN["top"]
        self.xlim = _pad(xlim)
        self.ylim = _pad(ylim)

    def x(self, v):
        lo, hi = self.xlim
        return self.x0 + (v - lo) / (hi - lo) * (self.x1 - self.x0)

    def y(self, v):
        lo, hi = self.ylim
        return self.y0 + (v - lo) / (hi - lo) * (self.y1 - self.y0)


def _pad(lim):
    lo, hi = float(lim[0]), float(lim[1])
    if not np.isfinite(lo) or not np.isfinite(hi):
        return 0.0, 1.0
    if hi == lo:
        return lo - 0.5, hi + 0.5
    span = hi - lo
    return lo - 0.05 * span, hi + 0.05 * span


def _ticks(lo, hi, n=5):
    return np.linspace(lo, hi, n)


def _header(width, height, title):
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
    ]


def _axes(fr, xlabel, ylabel, xticks=True):
    out = [
        f'<line x1="{_f(fr.x0)}" y1="{_f(fr.y0)}" x2="{_f(fr.x1)}" y2="{_f(fr.y0)}" stroke="black"/>',
        f'<line x1="{_f(fr.x0)}" y1="{_f(fr.y0)}" x2="{_f(fr.x0)}" y2="{_f(fr.y1)}" stroke="black"/>',
    ]
    for v in _ticks(*fr.ylim):
        y = fr.y(v)
        out.append(f'<line x1="{_f(fr.x0 - 4)}" y1="{_f(y)}" x2="{_f(fr.x0)}" y2="{_f(y)}" stroke="black"/>')
        out.append(f'<text x="{_f(fr.x0 - 6)}" y="{_f(y + 4)}" text-anchor="end">{v:.3g}</text>')
    if xticks:
        for v in _ticks(*fr.xlim):
            x = fr.x(v)
            out.append(f'<line x1="{_f(x)}" y1="{_f(fr.y0)}" x2="{_f(x)}" y2="{_f(fr.y0 + 4)}" stroke="black"/>')
            out.append(f'<text x="{_f(x)}" y="{_f(fr.y0 + 16)}" text-anchor="middle">{v:.3g}</text>')
    out.append(f'<text x="{_f((fr.x0 + fr.x1) / 2)}" y="{fr.height - 15}" text-anchor="middle">{escape(xlabel)}</text>')
    cy = (fr.y0 + fr.y1) / 2
    out.append(f'<text x="16" y="{_f(cy)}" text-anchor="middle" transform="rotate(-90 16 {_f(cy)})">{escape(ylabel)}</text>')
    return out


def _color_scale(values):
    """Blue (low) to red (high) hex colours."""
    v = np.asarray(values, dtype=np.float64)
    lo, hi = (float(v.min()), float(v.max())) if len(v) else (0.0, 1.0)
    t = np.zeros_like(v) if hi == lo else (v - lo) / (hi - lo)
    cold, warm = np.array([59, 76, 192]), np.array([180, 4, 38])
    rgb = np.rint(cold[None, :] * (1 - t[:, None]) + warm[None, :] * t[:, None]).astype(int)
    return ["#%02x%02x%02x" % tuple(c) for c in rgb]


def scatter(x, y, color=None, title="", xlabel="", ylabel="", color_label="", max_points=5000):
    """Scatter plot; above ``max_points`` an evenly spaced, deterministic
    selection of points is drawn (axes and colours still span all of them)."""
    x, y = np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)
    fr = _Frame((x.min(), x.max()) if len(x) else (0, 1), (y.min(), y.max()) if len(y) else (0, 1))
    out = _header(fr.width, fr.height, title) + _axes(fr, xlabel, ylabel)
    colors = _color_scale(color) if color is not None else [PALETTE[0]] * len(x)
    keep = range(len(x))
    if len(x) > max_points:
        keep = np.unique(np.linspace(0, len(x) - 1, max_points).astype(np.int64)).tolist()
        out.append(f'<text x="{fr.x0}" y="{fr.y1 - 8}">showing {len(keep)} of {len(x)} points</text>')
    for i in keep:
        out.append(f'<circle cx="{_f(fr.x(x[i]))}" cy="{_f(fr.y(y[i]))}" r="2" fill="{colors[i]}" fill-opacity="0.6"/>')
    if color is not None and color_label:
        out.append(f'<text x="{fr.x1}" y="{fr.y1 - 8}" text-anchor="end">colour: {escape(color_label)} '
                   f'(blue low, red high)</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def line_band(x, y, low, high, title="", xlabel="", ylabel=""):
    """Line with a shaded band between ``low`` and ``high``."""
    x = np.asarray(x, dtype=np.float64)
    y, low, high = (np.asarray(a, dtype=np.float64) for a in (y, low, high))
    ylim = (min(low.min(), y.min()), max(high.max(), y.max())) if len(x) else (0, 1)
    fr = _Frame((x.min(), x.max()) if len(x) else (0, 1), ylim)
    out = _header(fr.width, fr.height, title) + _axes(fr, xlabel, ylabel)
    if len(x):
        upper = [f"{_f(fr.x(a))},{_f(fr.y(b))}" for a, b in zip(x, high)]
        lower = [f"{_f(fr.x(a))},{_f(fr.y(b))}" for a, b in zip(x[::-1], low[::-1])]
        out.append(f'<polygon points="{" ".join(upper + lower)}" fill="{PALETTE[0]}" fill-opacity="0.2" stroke="none"/>')
        pts = " ".join(f"{_f(fr.x(a))},{_f(fr.y(b))}" for a, b in zip(x, y))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{PALETTE[0]}" stroke-width="2"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def bar(labels, values, title="", xlabel="", ylabel=""):
    """Horizontal bars, first label on top."""
    values = np.asarray(values, dtype=np.float64)
    n = len(values)
    height = max(HEIGHT, MARGIN["top"] + MARGIN["bottom"] + 18 * n)
    left = 150
    x0, x1 = left, WIDTH - MARGIN["right"]
    top, bottom = MARGIN["top"], height - MARGIN["bottom"]
    vmax = float(max(values.max(), 0.0)) if n else 1.0
    vmin = float(min(values.min(), 0.0)) if n else 0.0
    if vmax == vmin:
        vmax = vmin + 1.0

    def sx(v):
        return x0 + (v - vmin) / (vmax - vmin) * (x1 - x0)

    out = _header(WIDTH, height, title)
    step = (bottom - top) / max(n, 1)
    for i, (lab, v) in enumerate(zip(labels, values)):
        y = top + i * step
        a, b = sorted((sx(0.0), sx(v)))
        out.append(f'<rect x="{_f(a)}" y="{_f(y + 2)}" width="{_f(b - a)}" height="{_f(step - 4)}" fill="{PALETTE[0]}"/>')
        out.append(f'<text x="{x0 - 6}" y="{_f(y + step / 2 + 4)}" text-anchor="end">{escape(str(lab))}</text>')
    out.append(f'<line x1="{_f(sx(0.0))}" y1="{top}" x2="{_f(sx(0.0))}" y2="{bottom}" stroke="black"/>')
    for v in _ticks(vmin, vmax):
        out.append(f'<text x="{_f(sx(v))}" y="{bottom + 16}" text-anchor="middle">{v:.3g}</text>')
    out.append(f'<text x="{(x0 + x1) / 2:.1f}" y="{height - 15}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def heatmap(labels, matrix, title=""):
    """Square grid; cool to warm with increasing value."""
    m = np.asarray(matrix, dtype=np.float64)
    n = m.shape[0]
    left, top, cell = 150, 40, max(8, min(28, 440 // max(n, 1)))
    width = left + n * cell + 30
    height = top + n * cell + 150
    colors = _color_scale(m.ravel())
    out = _header(width, height, title)
    for i in range(n):
        out.append(f'<text x="{left - 6}" y="{top + i * cell + cell / 2 + 4:.1f}" text-anchor="end">{escape(labels[i])}</text>')
        for j in range(n):
            out.append(f'<rect x="{left + j * cell}" y="{top + i * cell}" width="{cell}" height="{cell}" '
                       f'fill="{colors[i * n + j]}"><title>{escape(labels[i])} x {escape(labels[j])}: '
                       f'{m[i, j]:.4g}</title></rect>')
    for j in range(n):
        x = left + j * cell + cell / 2
        y = top + n * cell + 6
        out.append(f'<text x="{x:.1f}" y="{y}" text-anchor="start" transform="rotate(60 {x:.1f} {y})">{escape(labels[j])}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write(path, svg_text):
    with open(path, "w", newline="\n") as fh:
        fh.write(svg_text)
