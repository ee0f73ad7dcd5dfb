"""Curve-angle parsing from matched vertebra lines.

Slopes are measured against the horizontal with y pointing down, so a
positive slope means the right endpoint sits lower in the image.  Lines
whose slope is a local extremum of the top-to-bottom slope sequence define
curve candidates; consecutive extremal lines form a curve when their slope
difference exceeds the reporting threshold.  The first and last lines are
always extremum-eligible, which realizes the global uppermost/lowermost
check against the most inclined vertebra.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .raster import Landmark, LineSegment, Point2, Region, Side

DEFAULT_ANGLE_THRESHOLD_DEG = 10.0

REGION_SPAN_THORACIC = "thoracic"
REGION_SPAN_LUMBAR = "lumbar"
REGION_SPAN_SPANNING = "spanning"


def line_slope(left: Point2, right: Point2) -> float:
    """Slope of the left-to-right direction in degrees, within (-90, 90)."""
    if left.x >= right.x:
        raise ValueError(
            f"slope requires left.x < right.x, got left.x={left.x}, right.x={right.x}"
        )
    return math.degrees(math.atan2(right.y - left.y, right.x - left.x))


@dataclass(frozen=True)
class VertebraLine:
    """Matched left/right landmark pair with confidence and slope."""

    left: Landmark
    right: Landmark
    confidence: float
    slope_deg: float

    def __post_init__(self) -> None:
        if self.left.position.x >= self.right.position.x:
            raise ValueError("vertebra line endpoints must satisfy left.x < right.x")

    @classmethod
    def from_landmarks(cls, left: Landmark, right: Landmark, confidence: float) -> "VertebraLine":
        return cls(
            left=left,
            right=right,
            confidence=confidence,
            slope_deg=line_slope(left.position, right.position),
        )

    @classmethod
    def from_segment(cls, seg: LineSegment, confidence: float = 1.0) -> "VertebraLine":
        """Promote a ground-truth segment to a line (unit confidence)."""
        return cls.from_landmarks(
            Landmark(seg.left, Side.LEFT, seg.region, confidence),
            Landmark(seg.right, Side.RIGHT, seg.region, confidence),
            confidence,
        )

    @property
    def region(self) -> Region:
        return self.left.region

    def midpoint(self) -> Point2:
        return Point2(
            (self.left.position.x + self.right.position.x) / 2.0,
            (self.left.position.y + self.right.position.y) / 2.0,
        )


@dataclass(frozen=True)
class UcaCurve:
    upper_index: int
    lower_index: int
    angle_deg: float
    region_span: str

    def __post_init__(self) -> None:
        if self.angle_deg < 0:
            raise ValueError(f"curve angle must be non-negative, got {self.angle_deg}")


@dataclass(frozen=True)
class UcaResult:
    curves: tuple[UcaCurve, ...] = ()
    per_line_slopes: tuple[float, ...] = ()

    def max_angle(self) -> float | None:
        if not self.curves:
            return None
        return max(c.angle_deg for c in self.curves)


def find_extremal_lines(slopes: list[float]) -> list[int]:
    """Indices of strict local extrema of the slope sequence.

    Runs of equal values count as one element and report their first
    index.  End elements qualify by comparison against their single
    neighbor; a single-element (or constant) sequence reports index 0.
    """
    if not slopes:
        raise ValueError("slope list must be nonempty")
    run_starts = [0]
    run_values = [slopes[0]]
    for i in range(1, len(slopes)):
        if slopes[i] != run_values[-1]:
            run_starts.append(i)
            run_values.append(slopes[i])
    n = len(run_values)
    if n == 1:
        return [run_starts[0]]
    out = []
    for k in range(n):
        if k == 0 or k == n - 1:
            # Adjacent runs differ by construction, so end runs always
            # qualify against their single neighbor.
            is_extremum = True
        else:
            a, b, c = run_values[k - 1], run_values[k], run_values[k + 1]
            is_extremum = (b > a and b > c) or (b < a and b < c)
        if is_extremum:
            out.append(run_starts[k])
    return out


def _region_span(upper: VertebraLine, lower: VertebraLine) -> str:
    if upper.region == lower.region:
        return REGION_SPAN_THORACIC if upper.region == Region.THORACIC else REGION_SPAN_LUMBAR
    return REGION_SPAN_SPANNING


def compute_uca(
    lines: list[VertebraLine],
    angle_threshold_deg: float = DEFAULT_ANGLE_THRESHOLD_DEG,
) -> UcaResult:
    """Curve angles from a top-to-bottom ordered list of vertebra lines.

    Consecutive extremal lines whose slope difference exceeds the threshold
    are reported as one curve each; fewer than two lines yield no curves.
    """
    slopes = tuple(ln.slope_deg for ln in lines)
    if len(lines) < 2:
        return UcaResult(curves=(), per_line_slopes=slopes)
    extrema = find_extremal_lines(list(slopes))
    curves = []
    for i, j in zip(extrema, extrema[1:]):
        angle = abs(slopes[i] - slopes[j])
        if angle > angle_threshold_deg:
            curves.append(
                UcaCurve(
                    upper_index=i,
                    lower_index=j,
                    angle_deg=angle,
                    region_span=_region_span(lines[i], lines[j]),
                )
            )
    return UcaResult(curves=tuple(curves), per_line_slopes=slopes)
