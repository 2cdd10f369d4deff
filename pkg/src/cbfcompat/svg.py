"""SVG figures of a 2-D run: cubes by status over the barrier level sets."""

from __future__ import annotations

import numpy as np

from .checker import CERTIFIED, INCOMPATIBLE, REFINED, Trace
from .expr import evaluate
from .geometry import Box

__all__ = ["marching_squares", "render_svg", "COLORS"]

COLORS = {
    CERTIFIED: "#7cc96f",
    REFINED: "#f5d547",
    INCOMPATIBLE: "#d9443c",
}
_LEGEND = ((CERTIFIED, "certified"), (REFINED, "refined"), (INCOMPATIBLE, "incompatible"))
_LEVEL_COLORS = ("#1f3b8f", "#8f1f6b", "#1f7a8f", "#5a5a5a")

# edges: 0 bottom (v0-v1), 1 right (v1-v2), 2 top (v3-v2), 3 left (v0-v3)
_SEGMENTS = {
    1: ((3, 0),), 2: ((0, 1),), 3: ((3, 1),), 4: ((1, 2),),
    6: ((0, 2),), 7: ((3, 2),), 8: ((2, 3),), 9: ((0, 2),),
    11: ((1, 2),), 12: ((1, 3),), 13: ((0, 1),), 14: ((3, 0),),
}  # fmt: skip


def marching_squares(values: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> list:
    """Line segments of the zero level set of ``values[i, j] = phi(xs[i], ys[j])``.

    Saddle cells are resolved by the sign of the cell mean; zero-length
    pieces (the curve passing exactly through a grid vertex) are skipped.
    """
    values = np.asarray(values, dtype=float)
    v0 = values[:-1, :-1]
    v1 = values[1:, :-1]
    v2 = values[1:, 1:]
    v3 = values[:-1, 1:]
    case = (v0 >= 0) * 1 + (v1 >= 0) * 2 + (v2 >= 0) * 4 + (v3 >= 0) * 8
    segments = []
    for i, j in zip(*np.nonzero((case != 0) & (case != 15))):
        c = [v0[i, j], v1[i, j], v2[i, j], v3[i, j]]
        x0, x1, y0, y1 = xs[i], xs[i + 1], ys[j], ys[j + 1]

        def point(edge):
            a, b, pa, pb = {
                0: (c[0], c[1], (x0, y0), (x1, y0)),
                1: (c[1], c[2], (x1, y0), (x1, y1)),
                2: (c[3], c[2], (x0, y1), (x1, y1)),
                3: (c[0], c[3], (x0, y0), (x0, y1)),
            }[edge]
            t = a / (a - b)
            return (pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1]))

        k = int(case[i, j])
        if k in (5, 10):
            centre_in = sum(c) / 4.0 >= 0
            # cut off the corners whose sign differs from the centre
            if (k == 5) == centre_in:
                pairs = ((0, 1), (2, 3))
            else:
                pairs = ((3, 0), (1, 2))
        else:
            pairs = _SEGMENTS[k]
        for a, b in pairs:
            pa, pb = point(a), point(b)
            if pa != pb:  # contour through a grid vertex
                segments.append((pa, pb))
    return segments


def _fmt(v: float) -> str:
    s = f"{v:.3f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def render_svg(trace: Trace | None, spec, bounding_box: Box, width: int = 640, grid: int = 200) -> str:
    """Cubes of ``trace`` coloured by status, over ``bounding_box`` and the curves ``h_i = 0``.

    Cubes are painted in trace order, so refined parents are covered by
    their children.  The output depends only on the inputs.
    """
    if spec.n != 2:
        raise ValueError(f"figures need a 2-D state space, got n = {spec.n}")
    lo, hi = bounding_box.lo, bounding_box.hi
    span = np.maximum(hi - lo, 1e-12)
    pad = 0.05 * span
    vlo, vhi = lo - pad, hi + pad
    scale = width / (vhi[0] - vlo[0])
    height = int(round((vhi[1] - vlo[1]) * scale))
    legend_h = 28

    def px(x, y):
        return (x - vlo[0]) * scale, (vhi[1] - y) * scale

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height + legend_h}" '
        f'viewBox="0 0 {width} {height + legend_h}">',
        f'<rect x="0" y="0" width="{width}" height="{height + legend_h}" fill="white"/>',
    ]

    if trace is not None and len(trace):
        centers = trace.column("centers")
        sizes = trace.column("size")
        status = trace.column("status")
        names = dict(_LEGEND)
        for (x, y), s, st in zip(centers, sizes, status):
            X, Y = px(x - s / 2, y + s / 2)
            out.append(
                f'<rect class="{names[int(st)]}" x="{_fmt(X)}" y="{_fmt(Y)}" width="{_fmt(s * scale)}" '
                f'height="{_fmt(s * scale)}" fill="{COLORS[int(st)]}" stroke="#333" stroke-width="0.2"/>'
            )

    X0, Y0 = px(lo[0], hi[1])
    out.append(
        f'<rect class="bounding-box" x="{_fmt(X0)}" y="{_fmt(Y0)}" width="{_fmt(span[0] * scale)}" '
        f'height="{_fmt(span[1] * scale)}" fill="none" stroke="black" stroke-width="1" stroke-dasharray="4 3"/>'
    )

    xs = np.linspace(vlo[0], vhi[0], grid)
    ys = np.linspace(vlo[1], vhi[1], grid)
    XX, YY = np.meshgrid(xs, ys, indexing="ij")
    pts = np.stack([XX.ravel(), YY.ravel()])
    for i, bar in enumerate(spec.barriers):
        vals = np.asarray(evaluate(bar.h, pts), dtype=float).reshape(grid, grid)
        segs = marching_squares(vals, xs, ys)
        d = " ".join(f"M{_fmt(px(*a)[0])} {_fmt(px(*a)[1])}L{_fmt(px(*b)[0])} {_fmt(px(*b)[1])}" for a, b in segs)
        color = _LEVEL_COLORS[i % len(_LEVEL_COLORS)]
        out.append(f'<path class="level-set" data-barrier="{i + 1}" d="{d}" fill="none" stroke="{color}" stroke-width="1.5"/>')

    x = 8.0
    for code, label in _LEGEND:
        out.append(f'<rect x="{_fmt(x)}" y="{height + 8}" width="12" height="12" fill="{COLORS[code]}" stroke="#333" stroke-width="0.5"/>')
        out.append(f'<text x="{_fmt(x + 16)}" y="{height + 19}" font-family="sans-serif" font-size="12">{label}</text>')
        x += 120.0
    out.append("</svg>")
    return "\n".join(out) + "\n"
