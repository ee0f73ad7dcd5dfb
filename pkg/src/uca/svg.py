"""Resolution-independent SVG overlays of pipeline results.

The overlay uses the raster's pixel coordinate system as its viewBox, so
it can be composited over an export of the source image at any scale.
Coordinates are emitted with fixed precision to keep repeated runs
byte-identical.
"""

from __future__ import annotations

import os
from pathlib import Path

from .angle import UcaResult, VertebraLine
from .raster import Landmark, Region, Side

_REGION_COLORS = {Region.THORACIC: "#7b68ee", Region.LUMBAR: "#2e8b57"}
_SIDE_COLORS = {Side.LEFT: "#ff8c00", Side.RIGHT: "#1e90ff"}
_CURVE_COLOR = "#dc143c"


def _f(v: float) -> str:
    return f"{v:.2f}"


def render_overlay(
    landmarks: list[Landmark] | tuple[Landmark, ...],
    lines: list[VertebraLine] | tuple[VertebraLine, ...],
    uca: UcaResult,
    width: int,
    height: int,
) -> str:
    """Build the SVG document text for one scan's results."""
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width} {height}" '
        f'width="{width}" height="{height}">',
        f'  <rect x="0" y="0" width="{width}" height="{height}" fill="#10141a"/>',
    ]

    curve_line_indices = set()
    for curve in uca.curves:
        curve_line_indices.add(curve.upper_index)
        curve_line_indices.add(curve.lower_index)

    parts.append('  <g stroke-linecap="round">')
    for idx, ln in enumerate(lines):
        color = _REGION_COLORS[ln.region]
        stroke = 2.5 if idx in curve_line_indices else 1.2
        parts.append(
            f'    <line x1="{_f(ln.left.position.x)}" y1="{_f(ln.left.position.y)}" '
            f'x2="{_f(ln.right.position.x)}" y2="{_f(ln.right.position.y)}" '
            f'stroke="{color}" stroke-width="{stroke}"/>'
        )
    parts.append("  </g>")

    parts.append("  <g>")
    for lm in landmarks:
        parts.append(
            f'    <circle cx="{_f(lm.position.x)}" cy="{_f(lm.position.y)}" r="2.2" '
            f'fill="{_SIDE_COLORS[lm.side]}" fill-opacity="0.9"/>'
        )
    parts.append("  </g>")

    parts.append(f'  <g font-family="monospace" font-size="11" fill="{_CURVE_COLOR}">')
    for curve in uca.curves:
        upper = lines[curve.upper_index]
        lower = lines[curve.lower_index]
        mid_y = (upper.midpoint().y + lower.midpoint().y) / 2.0
        anchor_x = max(upper.right.position.x, lower.right.position.x) + 6.0
        anchor_x = min(anchor_x, width - 4.0)
        parts.append(
            f'    <path d="M {_f(upper.right.position.x + 3)} {_f(upper.right.position.y)} '
            f'L {_f(anchor_x)} {_f(mid_y)} '
            f'L {_f(lower.right.position.x + 3)} {_f(lower.right.position.y)}" '
            f'fill="none" stroke="{_CURVE_COLOR}" stroke-width="0.8"/>'
        )
        parts.append(
            f'    <text x="{_f(anchor_x)}" y="{_f(mid_y - 3)}" text-anchor="end">'
            f"{curve.angle_deg:.1f}&#176; {curve.region_span}</text>"
        )
    parts.append("  </g>")
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_overlay(
    landmarks,
    lines,
    uca: UcaResult,
    width: int,
    height: int,
    path: str | os.PathLike,
) -> None:
    path = Path(path)
    text = render_overlay(landmarks, lines, uca, width, height)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)
