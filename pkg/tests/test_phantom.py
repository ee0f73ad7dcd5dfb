import math

import numpy as np
import pytest

from uca.angle import compute_uca
from uca.errors import PhantomSpecError
from uca.heatmap import CHANNEL_ORDER, PeakParams, extract_peaks
from uca.phantom import (
    CurveComponent,
    PhantomCase,
    PhantomSpec,
    generate_phantom,
    lines_from_segments,
    load_case_ground_truth,
    load_case_inputs,
    oracle_uca,
    write_case,
    write_dataset,
)
from uca.raster import LineSegment, Point2, Region

Y_TOP = 0.12 * 511.0
Y_BOT = 0.88 * 511.0


def monotone_slope_spec(top_deg: float, bottom_deg: float, **kwargs) -> PhantomSpec:
    """Single sinusoid whose slope runs monotonically top_deg -> bottom_deg.

    The cosine phase puts its maximum exactly at the top vertebra, so the
    extreme slopes land exactly on vertebra centers.
    """
    t_top = math.tan(math.radians(top_deg))
    t_bot = math.tan(math.radians(bottom_deg))
    span = Y_BOT - Y_TOP
    k = math.acos(t_bot / t_top) / span
    amplitude = -t_top / k  # line slope is -atan(x'), so flip the sway sign
    phase = -k * Y_TOP
    return PhantomSpec(
        curve=(CurveComponent(amplitude=amplitude, wavelength=2 * math.pi / k, phase=phase),),
        **kwargs,
    )


def test_straight_spine_has_no_curves():
    spec = PhantomSpec(curve=(CurveComponent(amplitude=0.0, wavelength=400.0),))
    case = generate_phantom(spec)
    assert case.gt_uca.per_line_slopes == pytest.approx([0.0] * spec.num_vertebrae, abs=1e-12)
    assert case.gt_uca.curves == ()


def test_same_seed_bit_identical():
    spec = PhantomSpec(noise_sigma=0.05, dropout_prob=0.2, seed=123)
    a = generate_phantom(spec)
    b = generate_phantom(spec)
    for ch_a, ch_b in zip(a.heatmaps.channels, b.heatmaps.channels):
        assert np.array_equal(ch_a.values, ch_b.values)
    assert np.array_equal(a.segmap.values, b.segmap.values)
    assert a.gt_lines == b.gt_lines
    assert a.gt_uca == b.gt_uca


def test_different_seed_changes_noise():
    spec_a = PhantomSpec(noise_sigma=0.05, seed=1)
    spec_b = PhantomSpec(noise_sigma=0.05, seed=2)
    a = generate_phantom(spec_a)
    b = generate_phantom(spec_b)
    assert not np.array_equal(a.heatmaps.channels[0].values, b.heatmaps.channels[0].values)
    assert a.gt_lines == b.gt_lines  # geometry is seed-independent


def test_designed_max_tilt_14_degrees():
    spec = monotone_slope_spec(14.0, -12.0)
    case = generate_phantom(spec)
    slopes = case.gt_uca.per_line_slopes
    assert max(slopes) == pytest.approx(14.0, abs=1e-9)
    assert abs(max(slopes, key=abs)) == pytest.approx(14.0, abs=0.5)


def test_designed_s_curve_single_26_degree_curve():
    spec = monotone_slope_spec(14.0, -12.0)
    case = generate_phantom(spec)
    result = oracle_uca(case)
    assert len(result.curves) == 1
    assert result.curves[0].angle_deg == pytest.approx(26.0, abs=1e-6)
    assert result.curves[0].upper_index == 0
    assert result.curves[0].lower_index == spec.num_vertebrae - 1


def test_oracle_matches_stored_ground_truth():
    case = generate_phantom(PhantomSpec(seed=5))
    assert oracle_uca(case) == case.gt_uca


def test_single_line_case_oracle_empty_curves():
    seg = LineSegment(Point2(40, 100), Point2(160, 110), Region.THORACIC)
    case = PhantomCase(
        heatmaps=generate_phantom(PhantomSpec()).heatmaps,
        segmap=generate_phantom(PhantomSpec()).segmap,
        gt_lines=(seg,),
        gt_uca=compute_uca(lines_from_segments([seg])),
    )
    result = oracle_uca(case)
    assert result.curves == ()
    assert len(result.per_line_slopes) == 1


def test_mirrored_curve_negates_slopes_preserves_angles():
    spec = PhantomSpec(
        curve=(CurveComponent(30.0, 400.0, 0.3), CurveComponent(10.0, 250.0, 1.1))
    )
    mirrored = PhantomSpec(
        curve=tuple(
            CurveComponent(-c.amplitude, c.wavelength, c.phase) for c in spec.curve
        )
    )
    a = generate_phantom(spec)
    b = generate_phantom(mirrored)
    assert list(b.gt_uca.per_line_slopes) == pytest.approx(
        [-s for s in a.gt_uca.per_line_slopes], abs=1e-9
    )
    assert [c.angle_deg for c in b.gt_uca.curves] == pytest.approx(
        [c.angle_deg for c in a.gt_uca.curves], abs=1e-9
    )


def test_gt_lines_canonical_and_inside_raster():
    spec = PhantomSpec(seed=3)
    case = generate_phantom(spec)
    assert len(case.gt_lines) == spec.num_vertebrae
    for seg in case.gt_lines:
        assert seg.left.x < seg.right.x
        for p in (seg.left, seg.right):
            assert 0 <= p.x <= spec.width - 1
            assert 0 <= p.y <= spec.height - 1


def test_region_labels_follow_thoracic_count():
    spec = PhantomSpec(thoracic_count=4, num_vertebrae=9)
    case = generate_phantom(spec)
    regions = [seg.region for seg in case.gt_lines]
    assert regions[:4] == [Region.THORACIC] * 4
    assert regions[4:] == [Region.LUMBAR] * 5


def test_segmap_equals_pseudo_mask_of_gt_lines():
    from uca.pseudomask import DilationKernel, build_pseudo_mask

    spec = PhantomSpec(seed=2, noise_sigma=0.08)
    case = generate_phantom(spec)
    rebuilt = build_pseudo_mask(list(case.gt_lines), DilationKernel(3), spec.width, spec.height)
    assert np.array_equal(case.segmap.values, rebuilt.values)


def test_dropout_removes_rendered_peaks_but_keeps_gt():
    spec = PhantomSpec(dropout_prob=0.4, seed=11)
    case = generate_phantom(spec)
    assert len(case.gt_lines) == spec.num_vertebrae
    params = PeakParams()
    total_peaks = sum(
        len(extract_peaks(case.heatmaps.channel(region, side), params, side, region))
        for region, side in CHANNEL_ORDER
    )
    assert total_peaks < 2 * spec.num_vertebrae
    assert total_peaks % 2 == 0  # dropout removes both endpoints of a pair


def test_noise_keeps_values_in_unit_interval():
    case = generate_phantom(PhantomSpec(noise_sigma=0.3, seed=8))
    for ch in case.heatmaps.channels:
        assert ch.values.min() >= 0.0
        assert ch.values.max() <= 1.0


def test_pixel_spacing_constant():
    assert generate_phantom(PhantomSpec()).pixel_spacing == 0.5


def test_spec_validation_errors():
    with pytest.raises(PhantomSpecError):
        PhantomSpec(num_vertebrae=1)
    with pytest.raises(PhantomSpecError):
        PhantomSpec(vertebra_half_width=1.0)
    with pytest.raises(PhantomSpecError):
        PhantomSpec(dropout_prob=1.0)
    with pytest.raises(PhantomSpecError):
        PhantomSpec(curve=(CurveComponent(amplitude=80.0, wavelength=400.0),))
    with pytest.raises(PhantomSpecError):
        PhantomSpec(thoracic_count=40)


def test_spec_json_round_trip():
    spec = PhantomSpec(
        curve=(CurveComponent(25.0, 350.0, 0.7),), noise_sigma=0.05, dropout_prob=0.1, seed=42
    )
    assert PhantomSpec.from_json_dict(spec.to_json_dict()) == spec


def test_case_write_load_round_trip(tmp_path):
    spec = PhantomSpec(seed=21)
    case = generate_phantom(spec)
    write_case(case, tmp_path / "case", spec=spec)
    stack, segmap = load_case_inputs(tmp_path / "case")
    assert np.array_equal(segmap.values, case.segmap.values)
    for orig, loaded in zip(case.heatmaps.channels, stack.channels):
        assert np.max(np.abs(orig.values - loaded.values)) <= 1.0 / 65535.0
    segments, uca, spacing = load_case_ground_truth(tmp_path / "case")
    assert spacing == case.pixel_spacing
    assert len(segments) == len(case.gt_lines)
    assert uca.per_line_slopes == pytest.approx(case.gt_uca.per_line_slopes)
    for a, b in zip(segments, case.gt_lines):
        assert a.left.x == pytest.approx(b.left.x)
        assert a.region == b.region


def test_write_dataset_manifest(tmp_path):
    names = write_dataset(PhantomSpec(), tmp_path / "ds", count=3, base_seed=100)
    assert names == ["case_0000", "case_0001", "case_0002"]
    import json

    manifest = json.loads((tmp_path / "ds" / "manifest.json").read_text())
    assert manifest["cases"] == names
    assert manifest["base_seed"] == 100
    for name in names:
        assert (tmp_path / "ds" / name / "segmap.pgm").exists()
        assert (tmp_path / "ds" / name / "gt_lines.json").exists()
