"""Candidate pairing: line-integral confidences, optimal assignment, filtering.

The confidence of a left/right candidate pair is the mean projection of the
bilinearly sampled affinity field onto the pair's unit direction, taken at
midpoint-rule sample points along the connecting segment.  Pairs violating
the geometric exclusion rules (right not strictly to the right, or farther
apart than ``max_pair_distance``) never survive.  The optimal assignment is
solved as a maximization problem, then matches whose confidence falls below
``drop_ratio`` times the mean matched confidence are discarded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .angle import VertebraLine
from .raster import Landmark, Point2, VectorRaster, bilinear_sample_many

DEFAULT_NUM_SAMPLES = 20
DEFAULT_DROP_RATIO = 0.5

# Finite stand-in for "excluded" entries so the assignment solver never
# sees infinities; real confidences of a unit field live in [-1, 1].
_EXCLUDED = -1e9


@dataclass(frozen=True)
class MatchParams:
    num_samples: int = DEFAULT_NUM_SAMPLES
    drop_ratio: float = DEFAULT_DROP_RATIO
    max_pair_distance: float | None = None  # None: half the affinity-map width

    def __post_init__(self) -> None:
        if self.num_samples < 2:
            raise ValueError(f"num_samples must be >= 2, got {self.num_samples}")
        if not 0.0 <= self.drop_ratio <= 1.0:
            raise ValueError(f"drop_ratio must be in [0, 1], got {self.drop_ratio}")
        if self.max_pair_distance is not None and self.max_pair_distance <= 0:
            raise ValueError(f"max_pair_distance must be positive, got {self.max_pair_distance}")

    def resolved_max_distance(self, map_width: int) -> float:
        if self.max_pair_distance is not None:
            return self.max_pair_distance
        return 0.5 * map_width


@dataclass(frozen=True)
class PairConfidence:
    left_index: int
    right_index: int
    confidence: float


def line_integral_confidence(
    affinity: VectorRaster, d_i: Point2, d_j: Point2, num_samples: int = DEFAULT_NUM_SAMPLES
) -> float:
    """Mean of A(p) . e over midpoint samples of the segment d_i -> d_j.

    ``e`` is the unit vector from d_i to d_j.  Sample points that fall
    outside the raster are clamped to the border.
    """
    if num_samples < 2:
        raise ValueError(f"num_samples must be >= 2, got {num_samples}")
    for p in (d_i, d_j):
        if not (0.0 <= p.x <= affinity.width - 1 and 0.0 <= p.y <= affinity.height - 1):
            raise ValueError(f"endpoint ({p.x}, {p.y}) outside affinity map bounds")
    dx = d_j.x - d_i.x
    dy = d_j.y - d_i.y
    length = float(np.hypot(dx, dy))
    if length == 0.0:
        raise ValueError("line integral endpoints coincide")
    us = (np.arange(num_samples, dtype=np.float64) + 0.5) / num_samples
    samples = bilinear_sample_many(affinity, d_i.x + us * dx, d_i.y + us * dy)
    dots = samples @ np.array([dx / length, dy / length])
    return float(dots.sum()) / num_samples


def hungarian_assign(cost, maximize: bool = False) -> list[tuple[int, int]]:
    """Globally optimal assignment of min(I, J) row/column pairs.

    Rectangular matrices are supported directly.  An empty matrix yields an
    empty assignment.  Costs must be finite.
    """
    matrix = np.asarray(cost, dtype=np.float64)
    if matrix.size == 0:
        return []
    if matrix.ndim != 2:
        raise ValueError(f"cost must be a 2-D matrix, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise ValueError("cost matrix contains non-finite entries")
    rows, cols = linear_sum_assignment(matrix, maximize=maximize)
    return list(zip(rows.tolist(), cols.tolist()))


def pair_confidence_matrix(
    left: list[Landmark],
    right: list[Landmark],
    affinity: VectorRaster,
    params: MatchParams,
) -> np.ndarray:
    """The c_ij matrix; geometrically excluded pairs get a large negative value."""
    max_dist = params.resolved_max_distance(affinity.width)
    matrix = np.full((len(left), len(right)), _EXCLUDED)
    for i, lm_l in enumerate(left):
        for j, lm_r in enumerate(right):
            if lm_r.position.x <= lm_l.position.x:
                continue
            if lm_l.position.distance_to(lm_r.position) > max_dist:
                continue
            matrix[i, j] = line_integral_confidence(
                affinity, lm_l.position, lm_r.position, params.num_samples
            )
    return matrix


def confidence_matrix_to_doc(matrix: np.ndarray) -> dict:
    """Diagnostic JSON form of a c_ij matrix; excluded pairs become null."""
    return {
        "schema": 1,
        "rows": int(matrix.shape[0]),
        "cols": int(matrix.shape[1]),
        "confidences": [
            [None if v <= _EXCLUDED / 2 else float(v) for v in row] for row in matrix.tolist()
        ],
    }


def match_candidates(
    left: list[Landmark],
    right: list[Landmark],
    affinity: VectorRaster,
    params: MatchParams,
) -> list[VertebraLine]:
    """Pair left/right candidates of one region into vertebra lines.

    Candidates must all share one region.  Returns the surviving matches as
    lines sorted top-to-bottom by midpoint y.
    """
    if not left or not right:
        return []
    regions = {lm.region for lm in left} | {lm.region for lm in right}
    if len(regions) != 1:
        raise ValueError(f"candidates span multiple regions: {sorted(r.value for r in regions)}")

    matrix = pair_confidence_matrix(left, right, affinity, params)
    assigned = hungarian_assign(matrix, maximize=True)
    matched = [
        PairConfidence(i, j, float(matrix[i, j]))
        for i, j in assigned
        if matrix[i, j] > _EXCLUDED / 2
    ]
    if not matched:
        return []
    mean_conf = float(np.mean([m.confidence for m in matched]))
    kept = [m for m in matched if m.confidence >= params.drop_ratio * mean_conf]

    lines = [
        VertebraLine.from_landmarks(left[m.left_index], right[m.right_index], m.confidence)
        for m in kept
    ]
    lines.sort(key=lambda ln: ((ln.left.position.y + ln.right.position.y) / 2.0, ln.left.position.x))
    return lines
