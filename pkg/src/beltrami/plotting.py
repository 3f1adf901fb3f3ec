"""Raster output: heat maps and deformed coordinate grids, written as PNG via Pillow."""

from __future__ import annotations

import numpy as np

from .grid import ComplexGrid

__all__ = ["colorize", "heatmap_png", "deformed_grid_png"]

# a few anchor colours of a perceptually ordered dark-to-bright ramp
_RAMP = np.array(
    [
        [68, 1, 84],
        [59, 82, 139],
        [33, 145, 140],
        [94, 201, 98],
        [253, 231, 37],
    ],
    dtype=float,
)


def colorize(values, vmin=None, vmax=None) -> np.ndarray:
    """Map a real array to ``uint8`` RGB; NaN becomes black."""
    v = np.asarray(values, dtype=float)
    finite = np.isfinite(v)
    lo = float(np.min(v[finite])) if vmin is None and finite.any() else (vmin or 0.0)
    hi = float(np.max(v[finite])) if vmax is None and finite.any() else (vmax or 1.0)
    u = np.clip((v - lo) / (hi - lo), 0, 1) if hi > lo else np.zeros_like(v)
    u = np.where(finite, u, 0.0)
    x = u * (len(_RAMP) - 1)
    idx = np.minimum(x.astype(int), len(_RAMP) - 2)
    frac = (x - idx)[..., None]
    rgb = _RAMP[idx] * (1 - frac) + _RAMP[idx + 1] * frac
    rgb[~finite] = 0
    return rgb.astype(np.uint8)


def heatmap_png(path, values, vmin=None, vmax=None, scale: int = 1) -> None:
    """Write a real 2-D array as a heat map; row 0 is drawn at the bottom (``Im z`` up)."""
    from PIL import Image

    img = Image.fromarray(colorize(np.asarray(values)[::-1], vmin, vmax), "RGB")
    if scale > 1:
        img = img.resize((img.width * scale, img.height * scale), Image.NEAREST)
    img.save(path, format="PNG")


def deformed_grid_png(path, values: ComplexGrid, lines: int = 24, radius: float | None = None, size: int = 512) -> None:
    """Images of the coordinate lines ``Re z = c`` and ``Im z = c`` under a mapped grid.

    ``values`` holds ``phi(z_jk)``; only lines inside ``|z| <= radius``
    (default the support radius) are drawn.
    """
    from PIL import Image, ImageDraw

    spec = values.spec
    R = spec.support_radius if radius is None else radius
    step = max(1, spec.n // (2 * lines))
    inside = spec.disk_mask(R)
    v = values.values
    ext = float(np.max(np.abs(v[inside]))) * 1.05 or 1.0
    img = Image.new("RGB", (size, size), "white")
    draw = ImageDraw.Draw(img)

    def px(c):
        return ((c.real / ext + 1) * size / 2, (1 - c.imag / ext) * size / 2)

    def polyline(idx_pairs, colour):
        pts = [px(v[j, k]) for j, k in idx_pairs if inside[j, k]]
        if len(pts) > 1:
            draw.line(pts, fill=colour, width=1)

    for j in range(0, spec.n, step):
        polyline([(j, k) for k in range(spec.n)], (40, 70, 160))
    for k in range(0, spec.n, step):
        polyline([(j, k) for j in range(spec.n)], (170, 50, 50))
    img.save(path, format="PNG")


def grid_heatmap(path, grid: ComplexGrid, part: str = "abs", **kw) -> None:
    f = {"abs": np.abs, "real": np.real, "imag": np.imag, "angle": np.angle}[part]
    heatmap_png(path, f(grid.values), **kw)
