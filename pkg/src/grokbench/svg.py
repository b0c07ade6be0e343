"""Minimal hand-written SVG line charts and grayscale heatmaps."""

import math

import numpy as np

W, H, PAD = 480, 320, 48


def _num(v):
    return format(v, ".4g")


def line_chart(xs, ys, title="", log_y=False):
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    ok = np.isfinite(ys) & np.isfinite(xs)
    if log_y:
        ok &= ys > 0
    vals = np.log10(ys[ok]) if log_y else ys[ok]
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
           f'viewBox="0 0 {W} {H}">',
           f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
           f'<text x="{W / 2}" y="20" text-anchor="middle" font-size="14">{title}</text>',
           f'<rect x="{PAD}" y="{PAD}" width="{W - 2 * PAD}" height="{H - 2 * PAD}" '
           'fill="none" stroke="black"/>']
    if vals.size:
        x0, x1 = xs[ok].min(), xs[ok].max()
        y0, y1 = vals.min(), vals.max()
        if x1 == x0:
            x1 = x0 + 1
        if y1 == y0:
            y0, y1 = y0 - 0.5, y1 + 0.5
        sx = lambda x: PAD + (x - x0) / (x1 - x0) * (W - 2 * PAD)
        sy = lambda y: H - PAD - (y - y0) / (y1 - y0) * (H - 2 * PAD)
        # Break the line at missing points.
        seg = []
        segments = [seg]
        for x, y, good in zip(xs, ys, ok):
            if not good:
                seg = []
                segments.append(seg)
                continue
            seg.append(f"{sx(x):.2f},{sy(math.log10(y) if log_y else y):.2f}")
        for s in segments:
            if s:
                out.append(f'<polyline fill="none" stroke="steelblue" stroke-width="2" '
                           f'points="{" ".join(s)}"/>')
        lab = (lambda v: "1e" + _num(v)) if log_y else _num
        out.append(f'<text x="{PAD - 4}" y="{PAD + 4}" text-anchor="end" font-size="10">{lab(y1)}</text>')
        out.append(f'<text x="{PAD - 4}" y="{H - PAD}" text-anchor="end" font-size="10">{lab(y0)}</text>')
        out.append(f'<text x="{PAD}" y="{H - PAD + 14}" font-size="10">{_num(x0)}</text>')
        out.append(f'<text x="{W - PAD}" y="{H - PAD + 14}" text-anchor="end" font-size="10">{_num(x1)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def heatmap(A, hide_diagonal=False, cell=4):
    """Linear grayscale, black at the minimum entry and white at the maximum."""
    A = np.array(A, dtype=float)
    if hide_diagonal and A.shape[0] == A.shape[1]:
        np.fill_diagonal(A, np.nan)
    finite = A[np.isfinite(A)]
    lo, hi = (finite.min(), finite.max()) if finite.size else (0.0, 1.0)
    span = hi - lo if hi > lo else 1.0
    r, c = A.shape
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{c * cell}" height="{r * cell}" '
           f'viewBox="0 0 {c * cell} {r * cell}" shape-rendering="crispEdges">']
    for i in range(r):
        for j in range(c):
            v = A[i, j]
            g = 255 if not np.isfinite(v) else int(round(255 * (v - lo) / span))
            out.append(f'<rect x="{j * cell}" y="{i * cell}" width="{cell}" height="{cell}" '
                       f'fill="rgb({g},{g},{g})"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
