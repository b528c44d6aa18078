"""Binary PPM (P6) heatmaps, one pixel per grid cell.

Invalid cells are pure white, excluded cells pure black. Valid cells map the
weight in [0, 1] through a piecewise-linear ramp over five viridis anchors,
which is monotone in luminance and never reaches pure black or white. The top
image row is the largest y coefficient.
"""
from __future__ import annotations

import numpy as np

from .sweep import CellClass, SweepGrid

WHITE = (255, 255, 255)
BLACK = (0, 0, 0)
ANCHORS = np.array(
    [
        (68, 1, 84),
        (59, 82, 139),
        (33, 145, 140),
        (94, 201, 98),
        (253, 231, 37),
    ],
    dtype=float,
)


def colormap(weight: float) -> tuple[int, int, int]:
    t = min(max(float(weight), 0.0), 1.0)
    stops = np.linspace(0.0, 1.0, len(ANCHORS))
    rgb = [np.interp(t, stops, ANCHORS[:, ch]) for ch in range(3)]
    return tuple(int(round(v)) for v in rgb)


def _cell_weight(cell, focal):
    if focal is None:
        return float(np.min(cell.weights))
    return float(cell.weights[focal])


def render_heatmap(grid: SweepGrid, focal: int | None = None) -> bytes:
    """Encode the grid as P6 bytes; ``focal=None`` colours by the smallest weight."""
    rows, cols = grid.shape
    pixels = bytearray()
    for row in reversed(grid.cells):
        for cell in row:
            if cell.cls is CellClass.INVALID:
                pixels.extend(WHITE)
            elif cell.cls is CellClass.EXCLUDED:
                pixels.extend(BLACK)
            else:
                pixels.extend(colormap(_cell_weight(cell, focal)))
    return f"P6\n{cols} {rows}\n255\n".encode("ascii") + bytes(pixels)
