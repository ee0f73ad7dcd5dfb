import json
from pathlib import Path

import pytest

from uca.cli import main
from uca.phantom import CurveComponent, PhantomSpec, generate_phantom, write_case
from uca.serialize import read_json, write_json_atomic


def tree_bytes(root: Path) -> dict:
    return {
        str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()
    }


def run_cli(*argv) -> int:
    return main([str(a) for a in argv])


def test_phantom_creates_expected_files(tmp_path):
    assert run_cli("phantom", "--out", tmp_path / "ds", "--count", 1, "--seed", 5) == 0
    case = tmp_path / "ds" / "case_0000"
    for name in (
        "heatmap_thoracic_left.pgm",
        "heatmap_thoracic_right.pgm",
        "heatmap_lumbar_left.pgm",
        "heatmap_lumbar_right.pgm",
        "heatmaps.json",
        "segmap.pgm",
        "gt_lines.json",
        "gt_uca.json",
        "case.json",
    ):
        assert (case / name).exists(), name
    manifest = json.loads((tmp_path / "ds" / "manifest.json").read_text())
    assert manifest["cases"] == ["case_0000"]


def test_phantom_rerun_is_byte_identical(tmp_path):
    for out in ("a", "b"):
        assert run_cli("phantom", "--out", tmp_path / out, "--count", 2, "--seed", 9) == 0
    assert tree_bytes(tmp_path / "a") == tree_bytes(tmp_path / "b")


def test_phantom_with_spec_file(tmp_path):
    spec = PhantomSpec(curve=(CurveComponent(20.0, 350.0, 0.5),), noise_sigma=0.02)
    spec_doc = spec.to_json_dict()
    spec_doc["schema"] = 1
    write_json_atomic(spec_doc, tmp_path / "spec.json")
    assert run_cli(
        "phantom", "--spec", tmp_path / "spec.json", "--out", tmp_path / "ds", "--count", 1,
        "--seed", 3,
    ) == 0
    meta = json.loads((tmp_path / "ds" / "case_0000" / "case.json").read_text())
    assert meta["spec"]["noise_sigma"] == pytest.approx(0.02)
    assert meta["spec"]["seed"] == 3


def test_run_single_case_matches_ground_truth(tmp_path):
    run_cli("phantom", "--out", tmp_path / "ds", "--count", 1, "--seed", 0)
    case = tmp_path / "ds" / "case_0000"
    assert run_cli("run", "--case", case, "--out", tmp_path / "pred") == 0
    pred_uca = json.loads((tmp_path / "pred" / "uca.json").read_text())
    gt_uca = json.loads((case / "gt_uca.json").read_text())
    assert len(pred_uca["curves"]) == len(gt_uca["curves"])
    for p, g in zip(pred_uca["curves"], gt_uca["curves"]):
        assert abs(p["angle_deg"] - g["angle_deg"]) <= 1.0
    assert (tmp_path / "pred" / "landmarks.json").exists()
    assert (tmp_path / "pred" / "lines.json").exists()


def test_run_with_explicit_raster_paths(tmp_path):
    run_cli("phantom", "--out", tmp_path / "ds", "--count", 1, "--seed", 0)
    case = tmp_path / "ds" / "case_0000"
    assert run_cli(
        "run",
        "--heatmaps",
        case / "heatmap_thoracic_left.pgm",
        case / "heatmap_thoracic_right.pgm",
        case / "heatmap_lumbar_left.pgm",
        case / "heatmap_lumbar_right.pgm",
        "--segmap", case / "segmap.pgm",
        "--out", tmp_path / "pred_raw",
    ) == 0
    assert run_cli("run", "--case", case, "--out", tmp_path / "pred_case") == 0
    assert (tmp_path / "pred_raw" / "uca.json").read_bytes() == (
        tmp_path / "pred_case" / "uca.json"
    ).read_bytes()


def test_run_requires_exactly_one_input_mode(tmp_path, capsys):
    assert run_cli("run", "--out", tmp_path / "x") == 2
    assert "exactly one of" in capsys.readouterr().err


def test_run_straight_spine_empty_curves(tmp_path):
    spec = PhantomSpec(curve=(CurveComponent(0.0, 400.0),))
    write_case(generate_phantom(spec), tmp_path / "case", spec=spec)
    assert run_cli("run", "--case", tmp_path / "case", "--out", tmp_path / "pred") == 0
    pred_uca = json.loads((tmp_path / "pred" / "uca.json").read_text())
    assert pred_uca["curves"] == []


def test_run_corrupt_raster_exits_2(tmp_path, capsys):
    run_cli("phantom", "--out", tmp_path / "ds", "--count", 1, "--seed", 0)
    case = tmp_path / "ds" / "case_0000"
    (case / "segmap.pgm").write_bytes(b"garbage")
    code = run_cli("run", "--case", case, "--out", tmp_path / "pred")
    assert code == 2
    assert "error" in capsys.readouterr().err.lower()


def test_run_missing_channel_exits_2(tmp_path):
    run_cli("phantom", "--out", tmp_path / "ds", "--count", 1, "--seed", 0)
    case = tmp_path / "ds" / "case_0000"
    (case / "heatmap_lumbar_left.pgm").unlink()
    assert run_cli("run", "--case", case, "--out", tmp_path / "pred") == 2


def test_run_bad_config_exits_3(tmp_path):
    run_cli("phantom", "--out", tmp_path / "ds", "--count", 1, "--seed", 0)
    (tmp_path / "cfg.json").write_text('{"schema": 1, "gamma": -3}')
    code = run_cli(
        "run", "--case", tmp_path / "ds" / "case_0000", "--config", tmp_path / "cfg.json",
        "--out", tmp_path / "pred",
    )
    assert code == 3


def test_run_dataset_equals_independent_runs(tmp_path):
    run_cli("phantom", "--out", tmp_path / "ds", "--count", 3, "--seed", 1)
    assert run_cli("run", "--dataset", tmp_path / "ds", "--out", tmp_path / "batch") == 0
    for k in range(3):
        name = f"case_{k:04d}"
        run_cli("run", "--case", tmp_path / "ds" / name, "--out", tmp_path / "single" / name)
    assert tree_bytes(tmp_path / "batch") == tree_bytes(tmp_path / "single")


def test_run_dataset_parallel_matches_serial(tmp_path):
    run_cli("phantom", "--out", tmp_path / "ds", "--count", 2, "--seed", 7)
    run_cli("run", "--dataset", tmp_path / "ds", "--out", tmp_path / "serial")
    run_cli("run", "--dataset", tmp_path / "ds", "--out", tmp_path / "par", "--jobs", 2)
    assert tree_bytes(tmp_path / "serial") == tree_bytes(tmp_path / "par")


def test_run_rerun_is_byte_identical(tmp_path):
    run_cli("phantom", "--out", tmp_path / "ds", "--count", 1, "--seed", 2)
    case = tmp_path / "ds" / "case_0000"
    run_cli("run", "--case", case, "--out", tmp_path / "p1", "--svg", tmp_path / "p1" / "o.svg")
    run_cli("run", "--case", case, "--out", tmp_path / "p2", "--svg", tmp_path / "p2" / "o.svg")
    assert tree_bytes(tmp_path / "p1") == tree_bytes(tmp_path / "p2")


def test_run_svg_overlay_contents(tmp_path):
    run_cli("phantom", "--out", tmp_path / "ds", "--count", 1, "--seed", 0)
    case = tmp_path / "ds" / "case_0000"
    svg = tmp_path / "overlay.svg"
    assert run_cli("run", "--case", case, "--out", tmp_path / "pred", "--svg", svg) == 0
    text = svg.read_text()
    assert text.startswith("<svg")
    assert 'viewBox="0 0 256 512"' in text
    assert "<line" in text and "<circle" in text and "<text" in text


def test_eval_perfect_predictions(tmp_path):
    # Ground truth with per-case curve geometry so reference angles vary.
    ds = tmp_path / "ds"
    names = []
    for k, amp in enumerate((26.0, 32.0, 38.0)):
        spec = PhantomSpec(curve=(CurveComponent(amp, 420.0, 0.2 * k),), seed=k)
        name = f"case_{k:04d}"
        write_case(generate_phantom(spec), ds / name, spec=spec)
        names.append(name)
    write_json_atomic({"schema": 1, "cases": names, "pixel_spacing": 0.5}, ds / "manifest.json")

    # Predictions that are literally the ground truth.
    for name in names:
        (tmp_path / "pred" / name).mkdir(parents=True, exist_ok=True)
        write_json_atomic(read_json(ds / name / "gt_lines.json"), tmp_path / "pred" / name / "lines.json")
        write_json_atomic(read_json(ds / name / "gt_uca.json"), tmp_path / "pred" / name / "uca.json")

    assert run_cli(
        "eval", "--pred", tmp_path / "pred", "--gt", ds, "--out", tmp_path / "report.json"
    ) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["summary"]["ap_mean"] == 1.0
    assert report["summary"]["ar_mean"] == 1.0
    assert report["summary"]["agreement"]["r_squared"] == pytest.approx(1.0, abs=1e-9)
    assert report["summary"]["agreement"]["mean_diff"] == pytest.approx(0.0, abs=1e-12)
    assert (tmp_path / "report.csv").exists()
    csv_text = (tmp_path / "report.csv").read_text()
    assert csv_text.splitlines()[0].startswith("case,")
    assert len(csv_text.splitlines()) == 4


def test_fifty_case_noisy_dataset_end_to_end(tmp_path):
    spec = PhantomSpec(noise_sigma=0.05, dropout_prob=0.1)
    spec_doc = spec.to_json_dict()
    spec_doc["schema"] = 1
    write_json_atomic(spec_doc, tmp_path / "spec.json")
    assert run_cli(
        "phantom", "--spec", tmp_path / "spec.json", "--out", tmp_path / "ds",
        "--count", 50, "--seed", 500,
    ) == 0
    manifest = json.loads((tmp_path / "ds" / "manifest.json").read_text())
    assert len(manifest["cases"]) == 50
    assert sum(1 for p in (tmp_path / "ds").iterdir() if p.is_dir()) == 50

    assert run_cli("run", "--dataset", tmp_path / "ds", "--out", tmp_path / "pred", "--jobs", 2) == 0
    assert run_cli(
        "eval", "--pred", tmp_path / "pred", "--gt", tmp_path / "ds", "--out", tmp_path / "report.json"
    ) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    summary = report["summary"]
    assert summary["case_count"] == 50
    assert 0.0 <= summary["ap_mean"] <= 1.0 and summary["ap_sd"] >= 0.0
    assert 0.0 <= summary["ar_mean"] <= 1.0 and summary["ar_sd"] >= 0.0
    agreement = summary["agreement"]
    assert agreement is not None
    for key in ("mean_diff", "loa_low", "loa_high", "within_5deg_fraction"):
        assert agreement[key] is not None
    assert agreement["loa_low"] <= agreement["mean_diff"] <= agreement["loa_high"]


def test_eval_missing_case_listed(tmp_path, capsys):
    run_cli("phantom", "--out", tmp_path / "ds", "--count", 2, "--seed", 0)
    run_cli("run", "--dataset", tmp_path / "ds", "--out", tmp_path / "pred")
    import shutil

    shutil.rmtree(tmp_path / "pred" / "case_0001")
    code = run_cli(
        "eval", "--pred", tmp_path / "pred", "--gt", tmp_path / "ds", "--out", tmp_path / "r.json"
    )
    assert code == 2
    assert "case_0001" in capsys.readouterr().err


def test_eval_rerun_is_byte_identical(tmp_path):
    run_cli("phantom", "--out", tmp_path / "ds", "--count", 2, "--seed", 4)
    run_cli("run", "--dataset", tmp_path / "ds", "--out", tmp_path / "pred")
    run_cli("eval", "--pred", tmp_path / "pred", "--gt", tmp_path / "ds", "--out", tmp_path / "r1.json")
    run_cli("eval", "--pred", tmp_path / "pred", "--gt", tmp_path / "ds", "--out", tmp_path / "r2.json")
    assert (tmp_path / "r1.json").read_bytes() == (tmp_path / "r2.json").read_bytes()
    assert (tmp_path / "r1.csv").read_bytes() == (tmp_path / "r2.csv").read_bytes()
