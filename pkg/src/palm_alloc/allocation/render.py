"""Pictures of two-dimensional allocations: territories in two shades, points as dots.

Each territory gets its own hue. Within a territory the cells are split by
distance rank into ``bands`` concentric layers of (nearly) equal area whose
shade alternates, which makes the unit area around every point visible as a
disc plus annuli. Output depends only on the inputs, so re-rendering gives a
byte-identical file.
"""

from __future__ import annotations

import colorsys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from palm_alloc.allocation.pattern import PointPattern
from palm_alloc.allocation.stable import AllocationField, distance_ranks

GOLDEN = 0.6180339887498949
MARKER = (20, 20, 20)


@dataclass(frozen=True)
class RenderSummary:
    path: Path
    width: int
    height: int
    territories: int
    points: int


def palette(n: int) -> np.ndarray:
    """(n, 2, 3) uint8 colors: a dark and a light shade per point, hues spread by the golden ratio."""
    out = np.empty((n, 2, 3), dtype=np.uint8)
    for i in range(n):
        h = (i * GOLDEN) % 1.0
        for j, (sat, val) in enumerate(((0.65, 0.72), (0.35, 0.96))):
            out[i, j] = [round(255 * v) for v in colorsys.hsv_to_rgb(h, sat, val)]
    return out


def shade_index(field: AllocationField, pattern: PointPattern, bands: int = 2) -> np.ndarray:
    """0/1 shade per cell, alternating across `bands` equal-area layers of each territory."""
    ranks = distance_ranks(field, pattern)
    q = field.quotas[field.assignment]
    return (ranks * bands // q) % 2


def _cell_image(field: AllocationField, pattern: PointPattern, bands: int) -> np.ndarray:
    """(side, side, 3) RGB per cell; axis 0 runs left to right, axis 1 bottom to top."""
    side = field.grid.side
    colors = palette(field.n)[field.assignment, shade_index(field, pattern, bands)]
    return colors.reshape(side, side, 3).transpose(1, 0, 2)[::-1]


def _marker_centers(field: AllocationField, pattern: PointPattern, px: int) -> np.ndarray:
    height = field.grid.side * px
    xy = pattern.ticks * (field.grid.c * px) / pattern.ticks_per_unit
    return np.column_stack([xy[:, 0], height - xy[:, 1]])


def render_allocation(field: AllocationField, pattern: PointPattern, out_path, *, pixels_per_cell: int | None = None,
                      bands: int = 2, marker_radius: float | None = None) -> RenderSummary:
    """Write the allocation as PNG or SVG, chosen by the file extension."""
    grid = field.grid
    if grid.d != 2:
        raise ValueError(f"rendering needs d = 2, got d = {grid.d}")
    grid.check_pattern(pattern)
    if field.unclaimed():
        raise ValueError("allocation has unclaimed cells")
    out_path = Path(out_path)
    suffix = out_path.suffix.lower()
    if suffix not in (".png", ".svg"):
        raise ValueError(f"unsupported image format {out_path.suffix!r}; use .png or .svg")
    px = pixels_per_cell or max(1, min(16, 800 // grid.side))
    radius = marker_radius if marker_radius is not None else max(1.5, 0.12 * grid.c * px)
    cells = _cell_image(field, pattern, bands)
    centers = _marker_centers(field, pattern, px)
    size = grid.side * px
    if suffix == ".png":
        _write_png(cells, centers, px, radius, out_path)
    else:
        _write_svg(cells, centers, px, radius, out_path)
    return RenderSummary(out_path, size, size, int((field.territory_sizes() > 0).sum()), pattern.n)


def _write_png(cells: np.ndarray, centers: np.ndarray, px: int, radius: float, path: Path) -> None:
    pixels = np.repeat(np.repeat(cells, px, axis=0), px, axis=1)
    img = Image.fromarray(np.ascontiguousarray(pixels), mode="RGB")
    draw = ImageDraw.Draw(img)
    for x, y in centers.tolist():
        draw.ellipse((x - radius, y - radius, x + radius, y + radius), fill=MARKER)
    img.save(path, format="PNG")


def _hex(rgb) -> str:
    return "#{:02x}{:02x}{:02x}".format(*(int(v) for v in rgb))


def _write_svg(cells: np.ndarray, centers: np.ndarray, px: int, radius: float, path: Path) -> None:
    rows, cols = cells.shape[:2]
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{cols * px}" height="{rows * px}" '
        f'viewBox="0 0 {cols * px} {rows * px}" shape-rendering="crispEdges">',
    ]
    # one rectangle per horizontal run of equal color
    for r in range(rows):
        row = cells[r]
        change = np.flatnonzero(np.any(row[1:] != row[:-1], axis=1)) + 1
        starts = np.r_[0, change]
        ends = np.r_[change, cols]
        for a, b in zip(starts.tolist(), ends.tolist()):
            lines.append(f'<rect x="{a * px}" y="{r * px}" width="{(b - a) * px}" height="{px}" fill="{_hex(row[a])}"/>')
    for x, y in centers.tolist():
        lines.append(f'<circle cx="{x:.3f}" cy="{y:.3f}" r="{radius:.3f}" fill="{_hex(MARKER)}"/>')
    lines.append("</svg>")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
