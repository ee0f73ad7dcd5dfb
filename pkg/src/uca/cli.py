"""Command-line interface: phantom generation, pipeline runs, evaluation.

Exit codes: 0 success, 2 input error, 3 config error, 4 internal error.
All outputs are written atomically and are byte-identical across repeated
runs with the same inputs, seeds, and config.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import PipelineConfig
from .errors import ConfigError, InputError, UcaError
from .metrics import angle_agreement, evaluate_lines
from .phantom import (
    DATASET_MANIFEST_FILENAME,
    GT_LINES_FILENAME,
    PhantomSpec,
    load_case_ground_truth,
    load_case_inputs,
    write_dataset,
)
from .pipeline import run_case
from .serialize import (
    SCHEMA_VERSION,
    landmarks_to_doc,
    line_eval_to_dict,
    read_json,
    uca_from_doc,
    uca_to_doc,
    vertebra_lines_from_doc,
    vertebra_lines_to_doc,
    write_json_atomic,
)
from .svg import write_overlay

PRED_LANDMARKS_FILENAME = "landmarks.json"
PRED_LINES_FILENAME = "lines.json"
PRED_UCA_FILENAME = "uca.json"
PRED_OVERLAY_FILENAME = "overlay.svg"


def _load_config(path: str | None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    return PipelineConfig.load(path)


def _load_spec(path: str | None) -> PhantomSpec:
    if path is None:
        return PhantomSpec()
    doc = read_json(path)
    return PhantomSpec.from_json_dict(doc)


# ---------------------------------------------------------------------------
# uca phantom
# ---------------------------------------------------------------------------


def cmd_phantom(args: argparse.Namespace) -> int:
    spec = _load_spec(args.spec)
    names = write_dataset(spec, args.out, args.count, args.seed)
    print(f"wrote {len(names)} case(s) to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# uca run
# ---------------------------------------------------------------------------


def _write_prediction(result, width: int, height: int, out_dir: str, with_svg: bool, svg_path=None):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_json_atomic(landmarks_to_doc(list(result.landmarks)), out / PRED_LANDMARKS_FILENAME)
    write_json_atomic(vertebra_lines_to_doc(list(result.lines)), out / PRED_LINES_FILENAME)
    write_json_atomic(uca_to_doc(result.uca), out / PRED_UCA_FILENAME)
    if with_svg:
        svg_path = svg_path or str(out / PRED_OVERLAY_FILENAME)
        write_overlay(result.landmarks, result.lines, result.uca, width, height, svg_path)


def _process_case(
    case_dir: str, out_dir: str, config_doc: dict, with_svg: bool, svg_path: str | None = None
) -> str:
    config = PipelineConfig.from_json_dict(config_doc)
    stack, segmap = load_case_inputs(case_dir)
    result = run_case(stack, segmap, config)
    _write_prediction(result, stack.width, stack.height, out_dir, with_svg, svg_path)
    return out_dir


def cmd_run(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    config_doc = config.to_json_dict()

    modes = sum(x is not None for x in (args.case, args.dataset, args.heatmaps))
    if modes != 1:
        raise InputError("exactly one of --case, --dataset, or --heatmaps must be given")

    if args.heatmaps is not None:
        if args.segmap is None or args.out is None:
            raise InputError("--heatmaps mode requires --segmap and --out")
        from .heatmap import HeatmapStack
        from .raster import load_scalar_raster

        stack = HeatmapStack(channels=tuple(load_scalar_raster(p) for p in args.heatmaps))
        segmap = load_scalar_raster(args.segmap)
        result = run_case(stack, segmap, config)
        _write_prediction(
            result, stack.width, stack.height, args.out,
            with_svg=args.svg is not None or args.with_svg, svg_path=args.svg,
        )
        print(f"wrote prediction to {args.out}")
        return 0

    if args.case is not None:
        out_dir = args.out if args.out is not None else str(Path(args.case) / "prediction")
        _process_case(
            args.case,
            out_dir,
            config_doc,
            with_svg=args.svg is not None or args.with_svg,
            svg_path=args.svg,
        )
        print(f"wrote prediction to {out_dir}")
        return 0

    dataset = Path(args.dataset)
    manifest = read_json(dataset / DATASET_MANIFEST_FILENAME)
    cases = list(manifest.get("cases", []))
    if not cases:
        raise InputError(f"dataset manifest in {dataset} lists no cases")
    out_root = Path(args.out if args.out is not None else dataset.with_name(dataset.name + "_pred"))
    jobs = [(str(dataset / name), str(out_root / name)) for name in cases]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futures = [
                pool.submit(_process_case, case_dir, out_dir, config_doc, args.with_svg)
                for case_dir, out_dir in jobs
            ]
            for fut in futures:
                fut.result()
    else:
        for case_dir, out_dir in jobs:
            _process_case(case_dir, out_dir, config_doc, args.with_svg)
    print(f"processed {len(jobs)} case(s) into {out_root}")
    return 0


# ---------------------------------------------------------------------------
# uca eval
# ---------------------------------------------------------------------------


def _gt_case_names(gt_dir: Path) -> list[str]:
    manifest_path = gt_dir / DATASET_MANIFEST_FILENAME
    if manifest_path.exists():
        return list(read_json(manifest_path).get("cases", []))
    names = sorted(
        p.name for p in gt_dir.iterdir() if p.is_dir() and (p / GT_LINES_FILENAME).exists()
    )
    if not names:
        raise InputError(f"no ground-truth cases found under {gt_dir}")
    return names


def cmd_eval(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    gt_dir = Path(args.gt)
    pred_dir = Path(args.pred)

    names = _gt_case_names(gt_dir)
    missing = [
        name for name in names if not (pred_dir / name / PRED_LINES_FILENAME).exists()
    ]
    if missing:
        raise InputError(
            f"predictions missing for {len(missing)} case(s): {', '.join(missing)}"
        )

    per_case = {}
    rows = []
    pred_angles = []
    gt_angles = []
    for name in names:
        gt_lines, gt_uca, spacing = load_case_ground_truth(gt_dir / name)
        pred_lines = vertebra_lines_from_doc(read_json(pred_dir / name / PRED_LINES_FILENAME))
        pred_uca = uca_from_doc(read_json(pred_dir / name / PRED_UCA_FILENAME))
        report = evaluate_lines(pred_lines, gt_lines, config.ede_params(pixel_spacing=spacing))

        entry = line_eval_to_dict(report)
        pred_angle = pred_uca.max_angle()
        gt_angle = gt_uca.max_angle()
        entry["pred_max_angle_deg"] = pred_angle
        entry["gt_max_angle_deg"] = gt_angle
        if pred_angle is not None and gt_angle is not None:
            pred_angles.append(pred_angle)
            gt_angles.append(gt_angle)
            entry["angle_diff_deg"] = abs(pred_angle - gt_angle)
        else:
            entry["angle_diff_deg"] = None
        per_case[name] = entry
        rows.append(
            {
                "case": name,
                "average_precision": report.average_precision,
                "average_recall": report.average_recall,
                "mean_ede": float(np.mean(report.per_line_ede)) if report.per_line_ede else "",
                "pred_count": report.pred_count,
                "gt_count": report.gt_count,
                "pred_max_angle_deg": "" if pred_angle is None else pred_angle,
                "gt_max_angle_deg": "" if gt_angle is None else gt_angle,
            }
        )

    aps = [e["average_precision"] for e in per_case.values()]
    ars = [e["average_recall"] for e in per_case.values()]
    summary = {
        "case_count": len(names),
        "ap_mean": float(np.mean(aps)),
        "ap_sd": float(np.std(aps, ddof=1)) if len(aps) > 1 else 0.0,
        "ar_mean": float(np.mean(ars)),
        "ar_sd": float(np.std(ars, ddof=1)) if len(ars) > 1 else 0.0,
        "angle_pairs": len(pred_angles),
    }
    if len(pred_angles) >= 2:
        try:
            agreement = angle_agreement(pred_angles, gt_angles)
            summary["agreement"] = {
                "slope": agreement.slope,
                "intercept": agreement.intercept,
                "r_squared": agreement.r_squared,
                "mean_diff": agreement.mean_diff,
                "loa_low": agreement.loa_low,
                "loa_high": agreement.loa_high,
                "within_5deg_fraction": agreement.within_5deg_fraction,
            }
        except ValueError:
            # Constant reference angles leave the regression undefined, but
            # the Bland-Altman side only needs the paired differences.
            diffs = np.asarray(pred_angles) - np.asarray(gt_angles)
            sd = float(diffs.std(ddof=1))
            summary["agreement"] = {
                "slope": None,
                "intercept": None,
                "r_squared": None,
                "mean_diff": float(diffs.mean()),
                "loa_low": float(diffs.mean() - 1.96 * sd),
                "loa_high": float(diffs.mean() + 1.96 * sd),
                "within_5deg_fraction": float(np.mean(np.abs(diffs) <= 5.0)),
            }
    else:
        summary["agreement"] = None

    report_doc = {"schema": SCHEMA_VERSION, "cases": per_case, "summary": summary}
    out_path = Path(args.out)
    write_json_atomic(report_doc, out_path)

    csv_path = out_path.with_suffix(".csv")
    buf = io.StringIO()
    fieldnames = [
        "case",
        "average_precision",
        "average_recall",
        "mean_ede",
        "pred_count",
        "gt_count",
        "pred_max_angle_deg",
        "gt_max_angle_deg",
    ]
    writer = csv.DictWriter(buf, fieldnames=fieldnames, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    tmp = csv_path.with_name(csv_path.name + ".tmp")
    tmp.write_text(buf.getvalue())
    os.replace(tmp, csv_path)

    print(
        f"evaluated {len(names)} case(s): AP {summary['ap_mean']:.3f}, "
        f"AR {summary['ar_mean']:.3f} -> {out_path}"
    )
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uca",
        description="Vertebra line detection and automatic ultrasound curve angles",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_phantom = sub.add_parser("phantom", help="generate a synthetic dataset with ground truth")
    p_phantom.add_argument("--spec", default=None, help="phantom spec JSON (default: built-in spec)")
    p_phantom.add_argument("--out", required=True, help="output dataset directory")
    p_phantom.add_argument("--count", type=int, default=1, help="number of cases")
    p_phantom.add_argument("--seed", type=int, default=0, help="base seed; case k uses seed+k")
    p_phantom.set_defaults(func=cmd_phantom)

    p_run = sub.add_parser("run", help="run the measurement pipeline on case(s)")
    src = p_run.add_mutually_exclusive_group()
    src.add_argument("--case", help="one case directory (heatmaps.json + segmap)")
    src.add_argument("--dataset", help="dataset directory with a manifest; runs every case")
    p_run.add_argument(
        "--heatmaps",
        nargs=4,
        metavar=("TL", "TR", "LL", "LR"),
        default=None,
        help="four heatmap raster paths in channel order "
        "(thoracic-left thoracic-right lumbar-left lumbar-right)",
    )
    p_run.add_argument("--segmap", default=None, help="segmentation raster (with --heatmaps)")
    p_run.add_argument("--config", default=None, help="pipeline config JSON")
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.add_argument("--svg", default=None, help="overlay SVG path (single-case mode)")
    p_run.add_argument(
        "--with-svg", action="store_true", help="also write overlay.svg next to each prediction"
    )
    p_run.add_argument("--jobs", type=int, default=1, help="parallel workers for --dataset")
    p_run.set_defaults(func=cmd_run)

    p_eval = sub.add_parser("eval", help="score predictions against ground truth")
    p_eval.add_argument("--pred", required=True, help="directory of per-case predictions")
    p_eval.add_argument("--gt", required=True, help="ground-truth dataset directory")
    p_eval.add_argument("--config", default=None, help="pipeline config JSON")
    p_eval.add_argument("--out", required=True, help="report JSON path (CSV written alongside)")
    p_eval.set_defaults(func=cmd_eval)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 3
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except UcaError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 4
    except Exception:
        traceback.print_exc()
        return 4


if __name__ == "__main__":
    sys.exit(main())
