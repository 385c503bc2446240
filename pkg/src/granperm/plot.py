"""Dependency-free SVG heat maps of prediction grids."""

from __future__ import annotations

import numpy as np

# Five-stop blue-to-yellow ramp.
_STOPS = np.array([
    [68, 1, 84],
    [59, 82, 139],
    [33, 145, 140],
    [94, 201, 98],
    [253, 231, 37],
], dtype=float)


def _color(t):
    t = min(max(float(t), 0.0), 1.0) * (len(_STOPS) - 1)
    i = min(int(t), len(_STOPS) - 2)
    rgb = _STOPS[i] + (t - i) * (_STOPS[i + 1] - _STOPS[i])
    return "#%02x%02x%02x" % tuple(int(round(v)) for v in rgb)


def _bilinear(M, k):
    """Upsample by ``k`` along both axes with linear interpolation."""
    n1, n2 = M.shape
    s1 = np.linspace(0, n1 - 1, (n1 - 1) * k + 1)
    s2 = np.linspace(0, n2 - 1, (n2 - 1) * k + 1)
    rows = np.array([np.interp(s2, np.arange(n2), M[i]) for i in range(n1)])
    return np.array([np.interp(s1, np.arange(n1), rows[:, j]) for j in range(rows.shape[1])]).T


def grid_svg(grid, size=400, upsample=None) -> str:
    """Heat map with the first axis horizontal and the second vertical
    (increasing upward), plus a value legend."""
    M = grid.as_matrix()
    if upsample is None:
        upsample = max(1, 80 // max(M.shape))
    F = _bilinear(M, upsample) if upsample > 1 else M
    vmin, vmax = float(np.min(M)), float(np.max(M))
    span = vmax - vmin if vmax > vmin else 1.0
    n1, n2 = F.shape
    cw, ch = size / n1, size / n2
    left, top = 60, 20
    x_name, y_name = grid.axis_names
    x_vals, y_vals = grid.coords[:, 0], grid.coords[:, 1]
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{left + size + 110}" '
        f'height="{top + size + 50}" font-family="sans-serif" font-size="11">',
    ]
    for i in range(n1):
        for j in range(n2):
            x = left + i * cw
            y = top + size - (j + 1) * ch
            out.append(f'<rect x="{x:.3f}" y="{y:.3f}" width="{cw + 0.05:.3f}" '
                       f'height="{ch + 0.05:.3f}" fill="{_color((F[i, j] - vmin) / span)}"/>')
    out.append(f'<rect x="{left}" y="{top}" width="{size}" height="{size}" fill="none" stroke="black"/>')
    out.append(f'<text x="{left + size / 2:.1f}" y="{top + size + 35}" text-anchor="middle">{x_name}</text>')
    out.append(f'<text x="15" y="{top + size / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 15 {top + size / 2:.1f})">{y_name}</text>')
    out.append(f'<text x="{left}" y="{top + size + 15}" text-anchor="start">{x_vals.min():.4g}</text>')
    out.append(f'<text x="{left + size}" y="{top + size + 15}" text-anchor="end">{x_vals.max():.4g}</text>')
    out.append(f'<text x="{left - 4}" y="{top + size}" text-anchor="end">{y_vals.min():.4g}</text>')
    out.append(f'<text x="{left - 4}" y="{top + 10}" text-anchor="end">{y_vals.max():.4g}</text>')
    lx = left + size + 20
    steps = 50
    for k in range(steps):
        t = k / (steps - 1)
        y = top + size - (k + 1) * size / steps
        out.append(f'<rect x="{lx}" y="{y:.3f}" width="16" height="{size / steps + 0.05:.3f}" '
                   f'fill="{_color(t)}"/>')
    for k in range(5):
        t = k / 4
        y = top + size - t * size
        out.append(f'<text x="{lx + 20}" y="{y + 4:.1f}">{vmin + t * (vmax - vmin):.4g}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
