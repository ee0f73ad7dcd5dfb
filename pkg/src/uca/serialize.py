"""Versioned JSON documents for landmarks, lines, curve angles, and reports.

Every document carries a top-level ``"schema": 1`` field.  Writers emit
sorted-key, indented JSON through an atomic temp-file rename so repeated
runs produce byte-identical files.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

from .angle import UcaCurve, UcaResult, VertebraLine
from .errors import InputError
from .metrics import LineEvalReport
from .raster import Landmark, LineSegment, Point2, Region, Side

SCHEMA_VERSION = 1


def write_json_atomic(doc: dict, path: str | os.PathLike) -> None:
    path = Path(path)
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def read_json(path: str | os.PathLike) -> dict:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        raise InputError(f"JSON document not found: {path}") from None
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot parse JSON document {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise InputError(f"JSON document {path} is not an object")
    schema = doc.get("schema")
    if schema != SCHEMA_VERSION:
        raise InputError(f"unsupported schema {schema!r} in {path} (expected {SCHEMA_VERSION})")
    return doc


# ---------------------------------------------------------------------------
# Landmarks
# ---------------------------------------------------------------------------


def landmarks_to_doc(landmarks: list[Landmark]) -> dict:
    return {
        "schema": SCHEMA_VERSION,
        "landmarks": [
            {
                "x": lm.position.x,
                "y": lm.position.y,
                "side": lm.side.value,
                "region": lm.region.value,
                "confidence": lm.confidence,
            }
            for lm in landmarks
        ],
    }


def landmarks_from_doc(doc: dict) -> list[Landmark]:
    try:
        return [
            Landmark(
                position=Point2(float(e["x"]), float(e["y"])),
                side=Side(e["side"]),
                region=Region(e["region"]),
                confidence=float(e["confidence"]),
            )
            for e in doc["landmarks"]
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed landmarks document: {exc}") from exc


# ---------------------------------------------------------------------------
# Lines: shared by ground truth (confidence 1) and predictions
# ---------------------------------------------------------------------------


def _line_entry(left: Point2, right: Point2, region: Region, confidence: float) -> dict:
    return {
        "left": {"x": left.x, "y": left.y},
        "right": {"x": right.x, "y": right.y},
        "region": region.value,
        "confidence": confidence,
    }


def segments_to_doc(segments: list[LineSegment]) -> dict:
    return {
        "schema": SCHEMA_VERSION,
        "lines": [_line_entry(s.left, s.right, s.region, 1.0) for s in segments],
    }


def vertebra_lines_to_doc(lines: list[VertebraLine]) -> dict:
    return {
        "schema": SCHEMA_VERSION,
        "lines": [
            _line_entry(ln.left.position, ln.right.position, ln.region, ln.confidence)
            for ln in lines
        ],
    }


def segments_from_doc(doc: dict) -> list[LineSegment]:
    try:
        return [
            LineSegment(
                left=Point2(float(e["left"]["x"]), float(e["left"]["y"])),
                right=Point2(float(e["right"]["x"]), float(e["right"]["y"])),
                region=Region(e["region"]),
            )
            for e in doc["lines"]
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed lines document: {exc}") from exc


def vertebra_lines_from_doc(doc: dict) -> list[VertebraLine]:
    lines = []
    try:
        for e in doc["lines"]:
            region = Region(e["region"])
            confidence = float(e["confidence"])
            conf = min(max(confidence, 0.0), 1.0)  # landmark confidence stays in [0, 1]
            left = Landmark(Point2(float(e["left"]["x"]), float(e["left"]["y"])), Side.LEFT, region, conf)
            right = Landmark(Point2(float(e["right"]["x"]), float(e["right"]["y"])), Side.RIGHT, region, conf)
            lines.append(VertebraLine.from_landmarks(left, right, confidence))
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed lines document: {exc}") from exc
    return lines


# ---------------------------------------------------------------------------
# Curve angles
# ---------------------------------------------------------------------------


def uca_to_doc(result: UcaResult) -> dict:
    return {
        "schema": SCHEMA_VERSION,
        "slopes": list(result.per_line_slopes),
        "curves": [
            {
                "upper": c.upper_index,
                "lower": c.lower_index,
                "angle_deg": c.angle_deg,
                "region_span": c.region_span,
            }
            for c in result.curves
        ],
    }


def uca_from_doc(doc: dict) -> UcaResult:
    try:
        curves = tuple(
            UcaCurve(
                upper_index=int(c["upper"]),
                lower_index=int(c["lower"]),
                angle_deg=float(c["angle_deg"]),
                region_span=str(c["region_span"]),
            )
            for c in doc["curves"]
        )
        slopes = tuple(float(s) for s in doc["slopes"])
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed curve-angle document: {exc}") from exc
    return UcaResult(curves=curves, per_line_slopes=slopes)


# ---------------------------------------------------------------------------
# Evaluation reports
# ---------------------------------------------------------------------------


def line_eval_to_dict(report: LineEvalReport) -> dict:
    return {
        "per_line_ede": list(report.per_line_ede),
        "average_precision": report.average_precision,
        "average_recall": report.average_recall,
        "matched_pairs": [list(p) for p in report.matched_pairs],
        "correct_count": report.correct_count,
        "pred_count": report.pred_count,
        "gt_count": report.gt_count,
    }
