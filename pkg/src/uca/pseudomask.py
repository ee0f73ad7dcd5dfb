"""Vertebra-region pseudo-masks from ground-truth line segments.

Each segment is rasterized with 8-connected Bresenham and dilated by a
square structuring element; the per-segment results are OR-combined into
one binary mask covering every vertebra region.  Windows are clipped at
the image border (no wrap, no padding value).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .raster import LineSegment, ScalarRaster

DEFAULT_KERNEL_SIZE = 3


@dataclass(frozen=True)
class DilationKernel:
    """Square k x k structuring element; k must be odd so it is centered."""

    size: int = DEFAULT_KERNEL_SIZE

    def __post_init__(self) -> None:
        if self.size < 1 or self.size % 2 == 0:
            raise ValueError(f"kernel size must be a positive odd integer, got {self.size}")


def bresenham_pixels(x0: int, y0: int, x1: int, y1: int) -> list[tuple[int, int]]:
    """8-connected Bresenham discretization from (x0, y0) to (x1, y1)."""
    pixels = []
    dx = abs(x1 - x0)
    dy = abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx - dy
    x, y = x0, y0
    while True:
        pixels.append((x, y))
        if x == x1 and y == y1:
            break
        e2 = 2 * err
        if e2 > -dy:
            err -= dy
            x += sx
        if e2 < dx:
            err += dx
            y += sy
    return pixels


def rasterize_segment(seg: LineSegment, width: int, height: int) -> ScalarRaster:
    """Binary raster of the segment; sub-pixel endpoints round to nearest pixel."""
    x0, y0 = int(round(seg.left.x)), int(round(seg.left.y))
    x1, y1 = int(round(seg.right.x)), int(round(seg.right.y))
    for x, y in ((x0, y0), (x1, y1)):
        if not (0 <= x < width and 0 <= y < height):
            raise ValueError(f"segment endpoint ({x}, {y}) outside {width}x{height} raster")
    mask = np.zeros((height, width))
    for x, y in bresenham_pixels(x0, y0, x1, y1):
        mask[y, x] = 1.0
    return ScalarRaster(width=width, height=height, values=mask)


def dilate(mask: ScalarRaster, kernel: DilationKernel) -> ScalarRaster:
    """Binary dilation by a centered square window, clipped at borders."""
    if not mask.is_binary():
        raise ValueError("dilate expects a binary mask")
    return ScalarRaster(
        width=mask.width, height=mask.height, values=_dilate_values(mask.values, kernel.size)
    )


def _dilate_values(values: np.ndarray, k: int) -> np.ndarray:
    if k == 1:
        return values.copy()
    h, w = values.shape
    src = values != 0.0
    out = np.zeros_like(src)
    r = k // 2
    for dy in range(-r, r + 1):
        ys0, ys1 = max(0, -dy), min(h, h - dy)
        yd0, yd1 = max(0, dy), min(h, h + dy)
        for dx in range(-r, r + 1):
            xs0, xs1 = max(0, -dx), min(w, w - dx)
            xd0, xd1 = max(0, dx), min(w, w + dx)
            out[yd0:yd1, xd0:xd1] |= src[ys0:ys1, xs0:xs1]
    return out.astype(np.float64)


def build_pseudo_mask(
    lines: list[LineSegment],
    kernel: DilationKernel,
    width: int,
    height: int,
) -> ScalarRaster:
    """Union of the dilated rasterizations of all segments.

    Dilation distributes over union, so the union is rasterized first and
    dilated once; the result is identical to per-segment dilation ORed
    together.
    """
    union = np.zeros((height, width))
    for seg in lines:
        union = np.maximum(union, rasterize_segment(seg, width, height).values)
    return ScalarRaster(width=width, height=height, values=_dilate_values(union, kernel.size))
