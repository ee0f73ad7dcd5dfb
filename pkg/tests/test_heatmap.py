import math

import numpy as np
import pytest

from oracles import scan_peaks
from uca.errors import RasterFormatError
from uca.heatmap import (
    HeatmapStack,
    PeakParams,
    extract_peaks,
    load_heatmap_stack,
    render_gaussian_channel,
    save_heatmap_stack,
)
from uca.raster import Point2, Region, ScalarRaster, Side

PARAMS = PeakParams(sigma=4.0, peak_threshold=0.3, nms_radius=5)


def test_render_peak_value_is_one():
    raster = render_gaussian_channel([Point2(10, 20)], sigma=4.0, width=32, height=32)
    assert raster.values[20, 10] == 1.0


def test_render_value_at_one_sigma():
    raster = render_gaussian_channel([Point2(10, 20)], sigma=4.0, width=32, height=32)
    assert raster.values[20, 14] == pytest.approx(math.exp(-0.5), abs=1e-12)
    assert raster.values[24, 10] == pytest.approx(math.exp(-0.5), abs=1e-12)


def test_render_empty_points_is_zero():
    raster = render_gaussian_channel([], sigma=4.0, width=16, height=8)
    assert not raster.values.any()


def test_render_overlap_uses_max():
    raster = render_gaussian_channel(
        [Point2(10, 10), Point2(13, 10)], sigma=4.0, width=32, height=32
    )
    assert raster.values.max() == 1.0
    # Between the peaks the max of the two kernels wins, never their sum.
    mid = raster.values[10, 11]  # 1 px from the first peak, 2 px from the second
    assert mid == pytest.approx(math.exp(-(1.0**2) / 32.0), abs=1e-12)


def test_render_subpixel_center():
    raster = render_gaussian_channel([Point2(10.5, 7.25)], sigma=2.0, width=24, height=16)
    expected = math.exp(-((0.5**2) + (0.25**2)) / 8.0)
    assert raster.values[7, 10] == pytest.approx(expected, abs=1e-12)


def test_render_rejects_out_of_bounds_point():
    with pytest.raises(ValueError):
        render_gaussian_channel([Point2(40, 4)], sigma=2.0, width=32, height=32)


def test_extract_single_gaussian():
    raster = render_gaussian_channel([Point2(50, 100)], sigma=4.0, width=128, height=256)
    found = extract_peaks(raster, PARAMS, Side.LEFT, Region.THORACIC)
    assert len(found) == 1
    lm = found[0]
    assert lm.position.distance_to(Point2(50, 100)) < 0.5
    assert lm.confidence == 1.0
    assert lm.side is Side.LEFT and lm.region is Region.THORACIC


def test_extract_two_close_gaussians_suppressed():
    raster = render_gaussian_channel(
        [Point2(50, 100), Point2(53, 100)], sigma=4.0, width=128, height=256
    )
    found = extract_peaks(raster, PARAMS, Side.LEFT, Region.THORACIC)
    assert len(found) == 1


def test_extract_all_zero_channel():
    assert extract_peaks(ScalarRaster.zeros(32, 32), PARAMS, Side.LEFT, Region.LUMBAR) == []


def test_extract_tie_break_prefers_smaller_yx():
    values = np.zeros((9, 9))
    values[4, 2] = 0.8
    values[4, 6] = 0.8  # within Chebyshev radius 5 of the first
    raster = ScalarRaster.from_array(values)
    found = extract_peaks(raster, PARAMS, Side.RIGHT, Region.LUMBAR)
    assert len(found) == 1
    assert found[0].position.x == pytest.approx(2.0)


def test_extract_matches_scan_oracle_on_random_rasters():
    rng = np.random.default_rng(11)
    for _ in range(30):
        h, w = rng.integers(6, 24, size=2)
        values = np.round(rng.random((h, w)), 2)  # coarse values force ties
        raster = ScalarRaster.from_array(values)
        params = PeakParams(sigma=2.0, peak_threshold=0.4, nms_radius=int(rng.integers(1, 4)))
        got = extract_peaks(raster, params, Side.LEFT, Region.THORACIC)
        expected = scan_peaks(values.tolist(), params.peak_threshold, params.nms_radius)
        assert len(got) == len(expected)
        # Confidence of each landmark equals the raw value at its source peak,
        # and each refined position stays within the 3x3 refinement window.
        got_confs = sorted(lm.confidence for lm in got)
        exp_confs = sorted(values[y, x] for x, y in expected)
        assert got_confs == pytest.approx(exp_confs)
        unclaimed = list(expected)
        for lm in got:
            nearest = min(
                unclaimed,
                key=lambda xy: (lm.position.x - xy[0]) ** 2 + (lm.position.y - xy[1]) ** 2,
            )
            unclaimed.remove(nearest)
            assert abs(lm.position.x - nearest[0]) <= 1.0
            assert abs(lm.position.y - nearest[1]) <= 1.0


def test_extract_count_monotone_in_threshold():
    rng = np.random.default_rng(5)
    values = rng.random((32, 32))
    raster = ScalarRaster.from_array(values)
    counts = []
    for thr in (0.2, 0.4, 0.6, 0.8):
        params = PeakParams(sigma=2.0, peak_threshold=thr, nms_radius=2)
        counts.append(len(extract_peaks(raster, params, Side.LEFT, Region.THORACIC)))
    assert counts == sorted(counts, reverse=True)


def test_extract_no_two_peaks_within_radius():
    rng = np.random.default_rng(9)
    for _ in range(20):
        values = rng.random((24, 24))
        raster = ScalarRaster.from_array(values)
        params = PeakParams(sigma=2.0, peak_threshold=0.3, nms_radius=3)
        found = extract_peaks(raster, params, Side.LEFT, Region.THORACIC)
        for i, a in enumerate(found):
            for b in found[i + 1 :]:
                cheb = max(abs(a.position.x - b.position.x), abs(a.position.y - b.position.y))
                assert cheb > params.nms_radius - 1  # sub-pixel refinement shifts < 1 px


def test_render_extract_round_trip_many_points():
    rng = np.random.default_rng(23)
    params = PeakParams(sigma=4.0, peak_threshold=0.3, nms_radius=5)
    for _ in range(10):
        points = []
        # Rejection-sample points separated by > 3 * nms_radius, away from borders.
        while len(points) < 6:
            cand = Point2(rng.uniform(13, 115), rng.uniform(13, 243))
            if all(
                max(abs(cand.x - p.x), abs(cand.y - p.y)) > 3 * params.nms_radius for p in points
            ):
                points.append(cand)
        raster = render_gaussian_channel(points, params.sigma, 128, 256)
        found = extract_peaks(raster, params, Side.LEFT, Region.THORACIC)
        assert len(found) == len(points)
        for p in points:
            best = min(found, key=lambda lm: lm.position.distance_to(p))
            assert best.position.distance_to(p) < 0.5


def test_stack_requires_equal_dimensions():
    a = ScalarRaster.zeros(8, 8)
    b = ScalarRaster.zeros(8, 9)
    with pytest.raises(Exception):
        HeatmapStack(channels=(a, a, a, b))


def test_stack_save_load_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    channels = tuple(ScalarRaster.from_array(rng.random((16, 12))) for _ in range(4))
    stack = HeatmapStack(channels=channels)
    save_heatmap_stack(stack, tmp_path)
    back = load_heatmap_stack(tmp_path / "heatmaps.json")
    for orig, loaded in zip(stack.channels, back.channels):
        assert np.max(np.abs(orig.values - loaded.values)) <= 1.0 / 65535.0


def test_stack_load_missing_channel(tmp_path):
    rng = np.random.default_rng(2)
    channels = tuple(ScalarRaster.from_array(rng.random((8, 8))) for _ in range(4))
    save_heatmap_stack(HeatmapStack(channels=channels), tmp_path)
    (tmp_path / "heatmap_lumbar_right.pgm").unlink()
    with pytest.raises(RasterFormatError):
        load_heatmap_stack(tmp_path / "heatmaps.json")
