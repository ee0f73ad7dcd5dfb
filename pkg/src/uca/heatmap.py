"""Gaussian landmark heatmaps: rendering and peak extraction.

Rendering places an unnormalized Gaussian kernel on every landmark and
combines overlapping kernels with a pixelwise max, so values stay in
[0, 1] and each peak keeps its value of 1.  Extraction is non-maximum
suppression over a square (Chebyshev) window with sub-pixel refinement by
the value centroid of the 3x3 neighborhood around each surviving peak.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import maximum_filter

from .errors import DimensionMismatchError, RasterFormatError
from .raster import Landmark, Point2, Region, ScalarRaster, Side, load_scalar_raster, save_scalar_raster

DEFAULT_SIGMA = 4.0
DEFAULT_PEAK_THRESHOLD = 0.3
DEFAULT_NMS_RADIUS = 5

# Fixed channel order: (region, side) pairs.
CHANNEL_ORDER: tuple[tuple[Region, Side], ...] = (
    (Region.THORACIC, Side.LEFT),
    (Region.THORACIC, Side.RIGHT),
    (Region.LUMBAR, Side.LEFT),
    (Region.LUMBAR, Side.RIGHT),
)


@dataclass(frozen=True)
class PeakParams:
    sigma: float = DEFAULT_SIGMA
    peak_threshold: float = DEFAULT_PEAK_THRESHOLD
    nms_radius: int = DEFAULT_NMS_RADIUS

    def __post_init__(self) -> None:
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.nms_radius < 1:
            raise ValueError(f"nms_radius must be >= 1, got {self.nms_radius}")
        if not 0.0 < self.peak_threshold < 1.0:
            raise ValueError(f"peak_threshold must be in (0, 1), got {self.peak_threshold}")


@dataclass(frozen=True)
class HeatmapStack:
    """Exactly four equally sized channels in CHANNEL_ORDER."""

    channels: tuple[ScalarRaster, ScalarRaster, ScalarRaster, ScalarRaster]

    def __post_init__(self) -> None:
        if len(self.channels) != 4:
            raise ValueError(f"heatmap stack needs exactly 4 channels, got {len(self.channels)}")
        w, h = self.channels[0].width, self.channels[0].height
        for ch in self.channels[1:]:
            if ch.width != w or ch.height != h:
                raise DimensionMismatchError("heatmap channels disagree on dimensions")
        for ch in self.channels:
            if ch.values.min() < 0.0 or ch.values.max() > 1.0:
                raise ValueError("heatmap values must lie in [0, 1]")
        object.__setattr__(self, "channels", tuple(self.channels))

    @property
    def width(self) -> int:
        return self.channels[0].width

    @property
    def height(self) -> int:
        return self.channels[0].height

    def channel(self, region: Region, side: Side) -> ScalarRaster:
        return self.channels[CHANNEL_ORDER.index((region, side))]


def render_gaussian_channel(
    points: list[Point2], sigma: float, width: int, height: int
) -> ScalarRaster:
    """Render exp(-||q - p||^2 / (2 sigma^2)) per point, combined with max.

    An empty point list yields an all-zero raster.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if not points:
        return ScalarRaster.zeros(width, height)
    xs = np.arange(width, dtype=np.float64)
    ys = np.arange(height, dtype=np.float64)
    # max over kernels == exp of the min squared distance (exp is monotone),
    # so the exponential runs once per pixel rather than once per point.
    min_d2 = np.full((height, width), np.inf)
    for p in points:
        if not (0.0 <= p.x <= width - 1 and 0.0 <= p.y <= height - 1):
            raise ValueError(f"point ({p.x}, {p.y}) outside {width}x{height} raster")
        d2 = (ys - p.y)[:, None] ** 2 + (xs - p.x)[None, :] ** 2
        np.minimum(min_d2, d2, out=min_d2)
    values = np.exp(min_d2 * (-1.0 / (2.0 * sigma * sigma)))
    return ScalarRaster(width=width, height=height, values=values)


def extract_peaks(
    channel: ScalarRaster, params: PeakParams, side: Side, region: Region
) -> list[Landmark]:
    """Non-maximum suppression peak detection with sub-pixel refinement.

    A pixel is kept when its value is >= the threshold and strictly
    dominates every other pixel within Chebyshev distance ``nms_radius``;
    equal-valued pixels are dominated by the one with smaller (y, x).
    Confidence is the raw peak value.
    """
    v = channel.values
    if v.min() < 0.0 or v.max() > 1.0:
        raise ValueError("heatmap channel values must lie in [0, 1]")
    r = params.nms_radius
    win = 2 * r + 1
    # Values live in [0, 1]; background fill of -1 keeps borders harmless.
    window_max = maximum_filter(v, size=win, mode="constant", cval=-1.0)
    cand_ys, cand_xs = np.nonzero((v >= params.peak_threshold) & (v >= window_max))

    h, w = v.shape
    landmarks: list[Landmark] = []
    for y, x in zip(cand_ys.tolist(), cand_xs.tolist()):
        y0, y1 = max(0, y - r), min(h, y + r + 1)
        x0, x1 = max(0, x - r), min(w, x + r + 1)
        tie_ys, tie_xs = np.nonzero(v[y0:y1, x0:x1] == v[y, x])
        keys = (tie_ys + y0) * w + (tie_xs + x0)
        if keys.min() != y * w + x:
            continue  # an equal-valued pixel with smaller (y, x) wins
        cy0, cy1 = max(0, y - 1), min(h, y + 2)
        cx0, cx1 = max(0, x - 1), min(w, x + 2)
        # Centroid of the 3x3 window values referenced to the window floor;
        # without the floor shift the near-flat Gaussian top drowns the
        # sub-pixel signal and refinement recovers almost nothing.
        patch = v[cy0:cy1, cx0:cx1]
        patch = patch - patch.min()
        total = patch.sum()
        if total > 0.0:
            gx = np.arange(cx0, cx1, dtype=np.float64)
            gy = np.arange(cy0, cy1, dtype=np.float64)
            px = float((patch.sum(axis=0) * gx).sum() / total)
            py = float((patch.sum(axis=1) * gy).sum() / total)
        else:
            px, py = float(x), float(y)
        landmarks.append(
            Landmark(
                position=Point2(px, py),
                side=side,
                region=region,
                confidence=float(v[y, x]),
            )
        )
    return landmarks


# ---------------------------------------------------------------------------
# Stack persistence: four raster files plus a JSON manifest
# ---------------------------------------------------------------------------


def save_heatmap_stack(stack: HeatmapStack, directory: str | os.PathLike) -> Path:
    """Write the four channels and a manifest into ``directory``.

    Returns the manifest path.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for (region, side), ch in zip(CHANNEL_ORDER, stack.channels):
        name = f"heatmap_{region.value}_{side.value}.pgm"
        save_scalar_raster(ch, directory / name)
        entries.append({"file": name, "region": region.value, "side": side.value})
    manifest = {"schema": 1, "channels": entries}
    path = directory / "heatmaps.json"
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    os.replace(tmp, path)
    return path


def load_heatmap_stack(manifest_path: str | os.PathLike) -> HeatmapStack:
    manifest_path = Path(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text())
    except FileNotFoundError:
        raise RasterFormatError(f"heatmap manifest not found: {manifest_path}") from None
    except (OSError, json.JSONDecodeError) as exc:
        raise RasterFormatError(f"cannot parse heatmap manifest {manifest_path}: {exc}") from exc
    by_key: dict[tuple[Region, Side], ScalarRaster] = {}
    for entry in manifest.get("channels", []):
        key = (Region(entry["region"]), Side(entry["side"]))
        by_key[key] = load_scalar_raster(manifest_path.parent / entry["file"])
    missing = [f"{r.value}/{s.value}" for r, s in CHANNEL_ORDER if (r, s) not in by_key]
    if missing:
        raise RasterFormatError(
            f"heatmap manifest {manifest_path} missing channels: {', '.join(missing)}"
        )
    return HeatmapStack(channels=tuple(by_key[key] for key in CHANNEL_ORDER))
