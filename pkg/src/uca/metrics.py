"""Evaluation metrics: endpoint distance error, AP/AR, Dice, agreement stats.

A predicted line scores exp(-d_left/s)/2 + exp(-d_right/s)/2 against its
ground-truth counterpart, so a perfect prediction scores 1 and the score
decays smoothly with endpoint distance.  Predictions are matched to ground
truth by an assignment that maximizes total score; a matched pair counts
as correct when both endpoint distances stay under the millimeter
threshold converted to pixels.  Precision is taken over predictions and
recall over ground truth (standard convention).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .angle import VertebraLine
from .errors import DimensionMismatchError
from .matching import hungarian_assign
from .raster import LineSegment, ScalarRaster

DEFAULT_EDE_SCALE = 100.0
DEFAULT_CORRECT_THRESHOLD_MM = 3.5
DEFAULT_PIXEL_SPACING = 0.5

_LOA_FACTOR = 1.96


@dataclass(frozen=True)
class EdeParams:
    s: float = DEFAULT_EDE_SCALE
    pixel_spacing: float = DEFAULT_PIXEL_SPACING
    correct_threshold_mm: float = DEFAULT_CORRECT_THRESHOLD_MM

    def __post_init__(self) -> None:
        if self.s <= 0:
            raise ValueError(f"scale s must be positive, got {self.s}")
        if self.pixel_spacing <= 0:
            raise ValueError(f"pixel_spacing must be positive, got {self.pixel_spacing}")
        if self.correct_threshold_mm <= 0:
            raise ValueError(
                f"correct_threshold_mm must be positive, got {self.correct_threshold_mm}"
            )

    @property
    def correct_threshold_px(self) -> float:
        return self.correct_threshold_mm / self.pixel_spacing


@dataclass(frozen=True)
class LineEvalReport:
    per_line_ede: tuple[float, ...]
    average_precision: float
    average_recall: float
    matched_pairs: tuple[tuple[int, int], ...]
    correct_count: int
    pred_count: int
    gt_count: int


@dataclass(frozen=True)
class AgreementReport:
    slope: float
    intercept: float
    r_squared: float
    mean_diff: float
    loa_low: float
    loa_high: float
    within_5deg_fraction: float


def endpoint_distance_error(pred: VertebraLine, gt: LineSegment, params: EdeParams) -> float:
    """(exp(-d_left/s) + exp(-d_right/s)) / 2 for corresponding endpoints."""
    d_l = pred.left.position.distance_to(gt.left)
    d_r = pred.right.position.distance_to(gt.right)
    return (math.exp(-d_l / params.s) + math.exp(-d_r / params.s)) / 2.0


def evaluate_lines(
    preds: list[VertebraLine], gts: list[LineSegment], params: EdeParams
) -> LineEvalReport:
    """Match predictions to ground truth and score precision/recall.

    Pairs are assigned to maximize total endpoint score.  When a side is
    empty its ratio is 1 by the vacuous convention (0/0) while the other
    side's ratio is 0.
    """
    n_pred, n_gt = len(preds), len(gts)
    if n_pred == 0 or n_gt == 0:
        return LineEvalReport(
            per_line_ede=(),
            average_precision=1.0 if n_pred == 0 else 0.0,
            average_recall=1.0 if n_gt == 0 else 0.0,
            matched_pairs=(),
            correct_count=0,
            pred_count=n_pred,
            gt_count=n_gt,
        )
    scores = np.zeros((n_pred, n_gt))
    for i, pred in enumerate(preds):
        for j, gt in enumerate(gts):
            scores[i, j] = endpoint_distance_error(pred, gt, params)
    pairs = hungarian_assign(scores, maximize=True)

    threshold_px = params.correct_threshold_px
    per_line = []
    correct = 0
    for i, j in pairs:
        per_line.append(float(scores[i, j]))
        d_l = preds[i].left.position.distance_to(gts[j].left)
        d_r = preds[i].right.position.distance_to(gts[j].right)
        if d_l < threshold_px and d_r < threshold_px:
            correct += 1
    return LineEvalReport(
        per_line_ede=tuple(per_line),
        average_precision=correct / n_pred,
        average_recall=correct / n_gt,
        matched_pairs=tuple(pairs),
        correct_count=correct,
        pred_count=n_pred,
        gt_count=n_gt,
    )


def dice_overlap(pred: ScalarRaster, gt: ScalarRaster) -> float:
    """2|A & B| / (|A| + |B|); two empty masks overlap perfectly."""
    if pred.width != gt.width or pred.height != gt.height:
        raise DimensionMismatchError(
            f"mask dimensions differ: {pred.width}x{pred.height} vs {gt.width}x{gt.height}"
        )
    a = pred.values != 0.0
    b = gt.values != 0.0
    denom = int(a.sum()) + int(b.sum())
    if denom == 0:
        return 1.0
    return 2.0 * int((a & b).sum()) / denom


def angle_agreement(pred_angles: list[float], ref_angles: list[float]) -> AgreementReport:
    """OLS of pred on ref plus Bland-Altman statistics of the differences."""
    if len(pred_angles) != len(ref_angles):
        raise ValueError(
            f"angle lists differ in length: {len(pred_angles)} vs {len(ref_angles)}"
        )
    if len(pred_angles) < 2:
        raise ValueError("agreement statistics need at least two paired angles")
    pred = np.asarray(pred_angles, dtype=np.float64)
    ref = np.asarray(ref_angles, dtype=np.float64)

    # Peak-to-peak is exact for identical values, unlike the variance, which
    # picks up rounding noise from the mean subtraction.
    if float(np.ptp(ref)) == 0.0:
        raise ValueError("reference angles are constant; regression is undefined")
    ref_var = float(np.var(ref))
    slope = float(np.cov(ref, pred, bias=True)[0, 1] / ref_var)
    intercept = float(pred.mean() - slope * ref.mean())
    residuals = pred - (slope * ref + intercept)
    ss_res = float((residuals**2).sum())
    ss_tot = float(((pred - pred.mean()) ** 2).sum())
    if ss_tot == 0.0:
        r_squared = 1.0 if ss_res < 1e-12 else 0.0
    else:
        r_squared = 1.0 - ss_res / ss_tot

    diffs = pred - ref
    mean_diff = float(diffs.mean())
    sd = float(diffs.std(ddof=1))
    return AgreementReport(
        slope=slope,
        intercept=intercept,
        r_squared=r_squared,
        mean_diff=mean_diff,
        loa_low=mean_diff - _LOA_FACTOR * sd,
        loa_high=mean_diff + _LOA_FACTOR * sd,
        within_5deg_fraction=float(np.mean(np.abs(diffs) <= 5.0)),
    )
