"""Contour extraction and SVG output for eigenfunctions and correlation diagrams.

All numbers written to SVG use six significant digits, and element order is
fixed by the input, so identical inputs give identical bytes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from html import escape

import numpy as np

from . import __version__
from .fields import ScalarField, unfold
from .geometry import RectangleGeometry, StadiumGeometry

__all__ = [
    "ContourSet",
    "EmptyTable",
    "marching_squares",
    "marching_squares_grid",
    "default_levels",
    "render_field_svg",
    "render_correlation_svg",
    "nice_ticks",
]

FIELD_SIZE = (900, 450)
CHART_SIZE = (900, 600)
MARGIN = 40


class EmptyTable(ValueError):
    pass


@dataclass
class ContourSet:
    levels: list[float]
    # lines[k] holds (points (m, 2), closed) tuples for levels[k]
    lines: list[list[tuple[np.ndarray, bool]]] = field(default_factory=list)

    def polylines(self, level_index: int | None = None):
        if level_index is not None:
            return self.lines[level_index]
        return [pl for per in self.lines for pl in per]

    def __len__(self):
        return sum(len(per) for per in self.lines)


# Corners: bl=1, br=2, tr=4, tl=8.  Edges: B(ottom), R(ight), T(op), L(eft).
# Saddle cases map to (segments if centre above, segments if centre below).
_SEGMENTS = {
    1: (("L", "B"),),
    2: (("B", "R"),),
    3: (("L", "R"),),
    4: (("R", "T"),),
    6: (("B", "T"),),
    7: (("L", "T"),),
    8: (("L", "T"),),
    9: (("B", "T"),),
    11: (("R", "T"),),
    12: (("L", "R"),),
    13: (("B", "R"),),
    14: (("L", "B"),),
}
_SADDLES = {
    5: ((("B", "R"), ("L", "T")), (("L", "B"), ("R", "T"))),
    10: ((("L", "B"), ("R", "T")), (("B", "R"), ("L", "T"))),
}


def marching_squares_grid(values, xs, ys, levels, mask=None) -> ContourSet:
    """Contours of ``values[j, i]`` sampled at (xs[i], ys[j]).

    Only cells whose four corners are valid (``mask``) are processed.  A
    corner counts as above the level when its value is strictly greater.
    Edge vertices are computed once per edge, so chained segments share
    bit-identical endpoints.
    """
    V = np.asarray(values, dtype=float)
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if mask is None:
        mask = np.isfinite(V)
    cell_ok = mask[:-1, :-1] & mask[:-1, 1:] & mask[1:, :-1] & mask[1:, 1:]
    out = ContourSet(levels=[float(lv) for lv in levels])
    for level in out.levels:
        above = V > level
        case = (
            above[:-1, :-1].astype(np.int8)
            + 2 * above[:-1, 1:]
            + 4 * above[1:, 1:]
            + 8 * above[1:, :-1]
        )
        active = cell_ok & (case != 0) & (case != 15)
        vertex = {}

        def edge_point(key):
            if key not in vertex:
                kind, j, i = key
                if kind == "h":
                    v0, v1 = V[j, i], V[j, i + 1]
                    t = (level - v0) / (v1 - v0)
                    vertex[key] = (xs[i] + t * (xs[i + 1] - xs[i]), ys[j])
                else:
                    v0, v1 = V[j, i], V[j + 1, i]
                    t = (level - v0) / (v1 - v0)
                    vertex[key] = (xs[i], ys[j] + t * (ys[j + 1] - ys[j]))
            return vertex[key]

        segments = []
        for j, i in zip(*np.nonzero(active)):
            c = int(case[j, i])
            edges = {"B": ("h", j, i), "T": ("h", j + 1, i), "L": ("v", j, i), "R": ("v", j, i + 1)}
            if c in _SADDLES:
                centre = 0.25 * (V[j, i] + V[j, i + 1] + V[j + 1, i] + V[j + 1, i + 1])
                segs = _SADDLES[c][0 if centre > level else 1]
            else:
                segs = _SEGMENTS[c]
            for e0, e1 in segs:
                k0 = (edges[e0][0], int(edges[e0][1]), int(edges[e0][2]))
                k1 = (edges[e1][0], int(edges[e1][1]), int(edges[e1][2]))
                edge_point(k0)
                edge_point(k1)
                segments.append((k0, k1))
        out.lines.append([(np.array([vertex[k] for k in chain]), closed) for chain, closed in _chain(segments)])
    return out


def _chain(segments):
    """Join segments sharing edge keys into polylines (open chains first)."""
    touching = {}
    for s, (a, b) in enumerate(segments):
        touching.setdefault(a, []).append(s)
        touching.setdefault(b, []).append(s)
    used = [False] * len(segments)

    def walk(start_key, s):
        chain = [start_key]
        key = start_key
        while s is not None:
            used[s] = True
            a, b = segments[s]
            key = b if a == key else a
            chain.append(key)
            s = next((t for t in touching[key] if not used[t]), None)
        return chain

    lines = []
    for s, (a, b) in enumerate(segments):
        if used[s]:
            continue
        for end in (a, b):
            if len(touching[end]) == 1:
                lines.append((walk(end, s), False))
                break
    for s, (a, b) in enumerate(segments):
        if not used[s]:
            chain = walk(a, s)
            if len(chain) > 2 and chain[0] == chain[-1]:
                lines.append((chain[:-1], True))
            else:
                lines.append((chain, False))
    return lines


def marching_squares(f: ScalarField, levels) -> ContourSet:
    """Contours of a field over the interior cells of its staggered lattice."""
    if f.grid.spec.quadrant:
        f = unfold(f)
    g = f.grid
    i0, j0 = int(g.i.min()), int(g.j.min())
    shape = (int(g.j.max()) - j0 + 1, int(g.i.max()) - i0 + 1)
    V = np.zeros(shape)
    mask = np.zeros(shape, dtype=bool)
    V[g.j - j0, g.i - i0] = f.values
    mask[g.j - j0, g.i - i0] = True
    xs = (np.arange(i0, i0 + shape[1]) + 0.5) * g.h
    ys = (np.arange(j0, j0 + shape[0]) + 0.5) * g.h
    return marching_squares_grid(V, xs, ys, levels, mask)


def default_levels(f: ScalarField) -> list[float]:
    """Zero plus eight evenly spaced levels strictly between min and max."""
    lo, hi = float(f.values.min()), float(f.values.max())
    levels = {0.0}
    if hi > lo:
        levels.update(float(v) for v in np.linspace(lo, hi, 10)[1:-1])
    return sorted(levels)


# -- SVG ----------------------------------------------------------------------------


def _n(v) -> str:
    s = f"{float(v):.6g}"
    return "0" if s == "-0" else s


def _header(width, height, note):
    return [
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f"<!-- stadium-spectra {__version__}{' ' + escape(note) if note else ''} -->",
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
    ]


class _Frame:
    """Uniform-scale map from domain coordinates to an SVG canvas (y flipped)."""

    def __init__(self, half_w, half_h, width, height, margin=MARGIN):
        self.s = min((width - 2 * margin) / (2 * half_w), (height - 2 * margin) / (2 * half_h))
        self.cx = width / 2
        self.cy = height / 2

    def __call__(self, x, y):
        return self.cx + self.s * x, self.cy - self.s * y


def _outline_path(geometry, fr: _Frame) -> str:
    if isinstance(geometry, RectangleGeometry):
        hx, hy = geometry.lx / 2, geometry.ly / 2
        pts = [fr(hx, hy), fr(-hx, hy), fr(-hx, -hy), fr(hx, -hy)]
        d = "M " + " L ".join(f"{_n(x)} {_n(y)}" for x, y in pts) + " Z"
    else:
        a, r = geometry.a, geometry.r
        rr = _n(fr.s * r)
        x0, y0 = fr(a, r)
        x1, y1 = fr(-a, r)
        x2, y2 = fr(-a, -r)
        x3, y3 = fr(a, -r)
        d = (
            f"M {_n(x0)} {_n(y0)} L {_n(x1)} {_n(y1)} "
            f"A {rr} {rr} 0 0 0 {_n(x2)} {_n(y2)} "
            f"L {_n(x3)} {_n(y3)} "
            f"A {rr} {rr} 0 0 0 {_n(x0)} {_n(y0)} Z"
        )
    return f'<path class="outline" d="{d}" fill="none" stroke="#000000" stroke-width="1.5"/>'


DEFAULT_STYLE = {
    "positive": "#c0392b",
    "negative": "#2166ac",
    "zero": "#000000",
    "width": 1.0,
    "zero_width": 2.2,
    "negative_dash": "5 3",
}


def render_field_svg(f: ScalarField, levels=None, styling: dict | None = None, title: str = "", note: str = "") -> str:
    """SVG contour plot of ``f`` inside its domain outline."""
    style = {**DEFAULT_STYLE, **(styling or {})}
    if f.grid.spec.quadrant:
        f = unfold(f)
    geometry = f.grid.geometry
    if isinstance(geometry, StadiumGeometry):
        half = (geometry.a + geometry.r, geometry.r)
    else:
        half = (geometry.lx / 2, geometry.ly / 2)
    width, height = FIELD_SIZE
    fr = _Frame(*half, width, height)
    levels = default_levels(f) if levels is None else list(levels)
    cs = marching_squares(f, levels)

    out = _header(width, height, note)
    if title:
        out.append(f'<text x="{width / 2:g}" y="24" text-anchor="middle" font-family="sans-serif" font-size="15">{escape(title)}</text>')
    out.append(_outline_path(geometry, fr))
    for level, lines in zip(cs.levels, cs.lines):
        if level == 0:
            kind, attrs = "zero", f'stroke="{style["zero"]}" stroke-width="{style["zero_width"]}"'
        elif level > 0:
            kind, attrs = "positive", f'stroke="{style["positive"]}" stroke-width="{style["width"]}"'
        else:
            kind, attrs = "negative", (
                f'stroke="{style["negative"]}" stroke-width="{style["width"]}" '
                f'stroke-dasharray="{style["negative_dash"]}"'
            )
        for pts, closed in lines:
            d = "M " + " L ".join(f"{_n(X)} {_n(Y)}" for X, Y in (fr(x, y) for x, y in pts))
            if closed:
                d += " Z"
            out.append(f'<path class="contour {kind}" data-level="{_n(level)}" d="{d}" fill="none" {attrs}/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def nice_ticks(lo: float, hi: float, target: int = 6) -> list[float]:
    """Round tick values (1, 2, 5 x 10^k spacing) inside [lo, hi]."""
    span = hi - lo
    if span <= 0:
        return [lo]
    raw = span / target
    mag = 10 ** np.floor(np.log10(raw))
    step = next(m * mag for m in (1, 2, 5, 10) if m * mag >= raw)
    first = np.ceil(lo / step - 1e-9) * step
    ticks = []
    t = first
    while t <= hi + 1e-9 * step:
        ticks.append(float(round(t / step) * step))
        t += step
    return ticks


_PALETTE = ("#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666")


def render_correlation_svg(table, cls: str, curve_indices=None, title: str | None = None) -> str:
    """Eigenvalue curves of one class versus a; one path per curve."""
    if cls not in table.curves:
        raise EmptyTable(f"class {cls} not in table")
    lam = table.curves[cls]
    if curve_indices is None:
        curve_indices = list(range(1, lam.shape[0] + 1))
    a = np.asarray(table.a_values, dtype=float)
    sel = [lam[i - 1] for i in curve_indices]
    finite = np.concatenate([c[np.isfinite(c)] for c in sel]) if sel else np.array([])
    if len(a) == 0 or finite.size == 0:
        raise EmptyTable("no finite eigenvalues to plot")

    width, height = CHART_SIZE
    x0, x1 = float(a.min()), float(a.max())
    y0, y1 = float(finite.min()), float(finite.max())
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 1.0, y1 + 1.0
    left, right, top, bottom = MARGIN, width - MARGIN, MARGIN, height - MARGIN

    def X(v):
        return left + (v - x0) / (x1 - x0) * (right - left)

    def Y(v):
        return bottom - (v - y0) / (y1 - y0) * (bottom - top)

    note = f"config_hash={table.config_hash}" if table.config_hash else ""
    out = _header(width, height, note)
    out.append(
        f'<text x="{width / 2:g}" y="24" text-anchor="middle" font-family="sans-serif" font-size="15">'
        f"{escape(title if title is not None else f'{cls} eigenvalues versus a')}</text>"
    )
    out.append(
        f'<path class="axes" d="M {left} {top} L {left} {bottom} L {right} {bottom}" '
        'fill="none" stroke="#000000" stroke-width="1"/>'
    )
    for t in nice_ticks(x0, x1):
        px = _n(X(t))
        out.append(f'<line class="tick" x1="{px}" y1="{bottom}" x2="{px}" y2="{bottom + 5}" stroke="#000000"/>')
        out.append(f'<text x="{px}" y="{bottom + 17}" text-anchor="middle" font-family="sans-serif" font-size="11">{_n(t)}</text>')
    for t in nice_ticks(y0, y1):
        py = _n(Y(t))
        out.append(f'<line class="tick" x1="{left - 5}" y1="{py}" x2="{left}" y2="{py}" stroke="#000000"/>')
        out.append(f'<text x="{left - 7}" y="{py}" text-anchor="end" dominant-baseline="middle" font-family="sans-serif" font-size="11">{_n(t)}</text>')
    out.append(f'<text x="{right}" y="{height - 6}" text-anchor="end" font-family="sans-serif" font-size="13">a</text>')
    out.append(f'<text x="{left}" y="{top - 8}" text-anchor="middle" font-family="sans-serif" font-size="13">λ</text>')

    for n_curve, (idx, c) in enumerate(zip(curve_indices, sel)):
        color = _PALETTE[n_curve % len(_PALETTE)]
        out.append(f'<g class="curve" data-curve="{idx}">')
        ok = np.isfinite(c)
        runs = np.flatnonzero(np.diff(np.concatenate([[0], ok.astype(int), [0]])))
        parts, dots = [], []
        for s, e in zip(runs[::2], runs[1::2]):
            if e - s == 1:
                dots.append((X(a[s]), Y(c[s])))
            else:
                parts.append("M " + " L ".join(f"{_n(X(a[j]))} {_n(Y(c[j]))}" for j in range(s, e)))
        if parts:
            out.append(f'<path class="curve-line" d="{" ".join(parts)}" fill="none" stroke="{color}" stroke-width="1.6"/>')
        for px, py in dots:
            out.append(f'<circle class="curve-point" cx="{_n(px)}" cy="{_n(py)}" r="2.5" fill="{color}"/>')
        # label at the last finite sample
        last = np.flatnonzero(ok)[-1] if ok.any() else None
        if last is not None:
            out.append(
                f'<text x="{_n(X(a[last]) - 4)}" y="{_n(Y(c[last]) - 5)}" text-anchor="end" font-family="sans-serif" '
                f'font-size="11" fill="{color}">f{idx}</text>'
            )
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
