"""Parametric synthetic spine scans with exact ground truth.

The spine centerline is a sum of sinusoids x(y); vertebra centers sit at
equally spaced depths between fixed top/bottom margins, and each vertebra
line is tilted perpendicular to the local centerline tangent so its slope
has the closed form -atan(x'(y)).  Heatmaps are rendered from the line
endpoints, the segmentation map is the dilated union of the lines, and the
curve-angle ground truth comes from running the angle parser directly on
the exact lines.

Dropout omits a vertebra's landmark pair from the rendered heatmaps while
keeping the pair in the ground truth, so recall degradation stays
measurable.  Everything is deterministic given the seed.
"""

from __future__ import annotations

import math
import os
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .angle import UcaResult, VertebraLine, compute_uca
from .errors import InputError, PhantomSpecError
from .heatmap import (
    CHANNEL_ORDER,
    DEFAULT_SIGMA,
    HeatmapStack,
    load_heatmap_stack,
    render_gaussian_channel,
    save_heatmap_stack,
)
from .pseudomask import DEFAULT_KERNEL_SIZE, DilationKernel, build_pseudo_mask
from .raster import (
    LineSegment,
    Point2,
    Region,
    ScalarRaster,
    Side,
    load_scalar_raster,
    save_binary_mask,
)
from .serialize import (
    SCHEMA_VERSION,
    read_json,
    segments_from_doc,
    segments_to_doc,
    uca_from_doc,
    uca_to_doc,
    write_json_atomic,
)

PHANTOM_PIXEL_SPACING = 0.5  # mm per pixel; puts the 3.5 mm rule at 7 px

# Vertical placement margins keep tilted lines inside the raster.
_Y_MARGIN_FRACTION = 0.12
# Minimum clearance of any endpoint from the raster border, in pixels.
_BORDER_MARGIN = 4.0

SEGMAP_FILENAME = "segmap.pgm"
GT_LINES_FILENAME = "gt_lines.json"
GT_UCA_FILENAME = "gt_uca.json"
CASE_META_FILENAME = "case.json"
DATASET_MANIFEST_FILENAME = "manifest.json"


@dataclass(frozen=True)
class CurveComponent:
    """One sinusoid of the centerline: x offset = amplitude * sin(2 pi y / wavelength + phase)."""

    amplitude: float
    wavelength: float
    phase: float = 0.0

    def __post_init__(self) -> None:
        if self.wavelength <= 0:
            raise ValueError(f"wavelength must be positive, got {self.wavelength}")


@dataclass(frozen=True)
class PhantomSpec:
    width: int = 256
    height: int = 512
    num_vertebrae: int = 17
    curve: tuple[CurveComponent, ...] = (CurveComponent(amplitude=30.0, wavelength=400.0),)
    vertebra_half_width: float = 60.0
    thoracic_count: int = 10
    noise_sigma: float = 0.0
    dropout_prob: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.num_vertebrae < 2:
            raise PhantomSpecError(f"num_vertebrae must be >= 2, got {self.num_vertebrae}")
        if self.vertebra_half_width < 2:
            raise PhantomSpecError(
                f"vertebra_half_width must be >= 2 px, got {self.vertebra_half_width}"
            )
        if not 0.0 <= self.dropout_prob < 1.0:
            raise PhantomSpecError(f"dropout_prob must be in [0, 1), got {self.dropout_prob}")
        if self.noise_sigma < 0.0:
            raise PhantomSpecError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if not 0 <= self.thoracic_count <= self.num_vertebrae:
            raise PhantomSpecError(
                f"thoracic_count must be in [0, {self.num_vertebrae}], got {self.thoracic_count}"
            )
        components = tuple(
            c if isinstance(c, CurveComponent) else CurveComponent(*c) for c in self.curve
        )
        object.__setattr__(self, "curve", components)
        # The centerline must keep a full half-width clear of both lateral
        # borders, even at the sum of all component amplitudes.
        sway = sum(abs(c.amplitude) for c in components)
        half = self.width / 2.0
        if sway + self.vertebra_half_width + _BORDER_MARGIN > half:
            raise PhantomSpecError(
                f"centerline sway {sway:.1f} px plus half-width "
                f"{self.vertebra_half_width:.1f} px exceeds lateral margin for width {self.width}"
            )

    def centerline_x(self, y: float) -> float:
        x = self.width / 2.0
        for c in self.curve:
            x += c.amplitude * math.sin(2.0 * math.pi * y / c.wavelength + c.phase)
        return x

    def centerline_dxdy(self, y: float) -> float:
        s = 0.0
        for c in self.curve:
            k = 2.0 * math.pi / c.wavelength
            s += c.amplitude * k * math.cos(k * y + c.phase)
        return s

    def to_json_dict(self) -> dict:
        doc = asdict(self)
        doc["curve"] = [
            {"amplitude": c.amplitude, "wavelength": c.wavelength, "phase": c.phase}
            for c in self.curve
        ]
        return doc

    @classmethod
    def from_json_dict(cls, doc: dict) -> "PhantomSpec":
        try:
            curve = tuple(
                CurveComponent(
                    amplitude=float(c["amplitude"]),
                    wavelength=float(c["wavelength"]),
                    phase=float(c.get("phase", 0.0)),
                )
                for c in doc.get("curve", [])
            ) or PhantomSpec().curve
            return cls(
                width=int(doc.get("width", 256)),
                height=int(doc.get("height", 512)),
                num_vertebrae=int(doc.get("num_vertebrae", 17)),
                curve=curve,
                vertebra_half_width=float(doc.get("vertebra_half_width", 60.0)),
                thoracic_count=int(doc.get("thoracic_count", 10)),
                noise_sigma=float(doc.get("noise_sigma", 0.0)),
                dropout_prob=float(doc.get("dropout_prob", 0.0)),
                seed=int(doc.get("seed", 0)),
            )
        except (TypeError, ValueError, KeyError) as exc:
            raise PhantomSpecError(f"malformed phantom spec: {exc}") from exc


@dataclass(frozen=True)
class PhantomCase:
    heatmaps: HeatmapStack
    segmap: ScalarRaster
    gt_lines: tuple[LineSegment, ...]
    gt_uca: UcaResult
    pixel_spacing: float = PHANTOM_PIXEL_SPACING


def lines_from_segments(segments: list[LineSegment] | tuple[LineSegment, ...]) -> list[VertebraLine]:
    """Promote exact ground-truth segments to unit-confidence lines."""
    return [VertebraLine.from_segment(seg) for seg in segments]


def _ground_truth_lines(spec: PhantomSpec) -> list[LineSegment]:
    margin = _Y_MARGIN_FRACTION * (spec.height - 1)
    ys = np.linspace(margin, (spec.height - 1) - margin, spec.num_vertebrae)
    lines = []
    for i, y in enumerate(ys):
        cx = spec.centerline_x(float(y))
        slope = spec.centerline_dxdy(float(y))
        inv_norm = 1.0 / math.hypot(1.0, slope)
        nx, ny = inv_norm, -slope * inv_norm  # unit normal to the centerline tangent
        hw = spec.vertebra_half_width
        left = Point2(cx - hw * nx, float(y) - hw * ny)
        right = Point2(cx + hw * nx, float(y) + hw * ny)
        for p in (left, right):
            if not (
                _BORDER_MARGIN <= p.x <= spec.width - 1 - _BORDER_MARGIN
                and _BORDER_MARGIN <= p.y <= spec.height - 1 - _BORDER_MARGIN
            ):
                raise PhantomSpecError(
                    f"vertebra {i} endpoint ({p.x:.1f}, {p.y:.1f}) violates the "
                    f"{_BORDER_MARGIN:.0f} px border margin"
                )
        region = Region.THORACIC if i < spec.thoracic_count else Region.LUMBAR
        lines.append(LineSegment(left=left, right=right, region=region))
    return lines


def generate_phantom(spec: PhantomSpec) -> PhantomCase:
    """Render a synthetic case: heatmaps, segmentation map, exact ground truth."""
    gt_lines = _ground_truth_lines(spec)
    rng = np.random.default_rng(spec.seed)

    # One dropout coin per vertebra: a dropped vertebra loses both rendered
    # landmarks but stays in the ground truth.
    dropped = rng.random(spec.num_vertebrae) < spec.dropout_prob

    points: dict[tuple[Region, Side], list[Point2]] = {key: [] for key in CHANNEL_ORDER}
    for i, seg in enumerate(gt_lines):
        if dropped[i]:
            continue
        points[(seg.region, Side.LEFT)].append(seg.left)
        points[(seg.region, Side.RIGHT)].append(seg.right)

    channels = []
    for key in CHANNEL_ORDER:
        raster = render_gaussian_channel(points[key], DEFAULT_SIGMA, spec.width, spec.height)
        if spec.noise_sigma > 0.0:
            noisy = raster.values + rng.normal(0.0, spec.noise_sigma, raster.values.shape)
            raster = ScalarRaster.from_array(np.clip(noisy, 0.0, 1.0))
        channels.append(raster)

    segmap = build_pseudo_mask(
        gt_lines, DilationKernel(DEFAULT_KERNEL_SIZE), spec.width, spec.height
    )
    gt_uca = compute_uca(lines_from_segments(gt_lines))
    return PhantomCase(
        heatmaps=HeatmapStack(channels=tuple(channels)),
        segmap=segmap,
        gt_lines=tuple(gt_lines),
        gt_uca=gt_uca,
        pixel_spacing=PHANTOM_PIXEL_SPACING,
    )


def oracle_uca(case: PhantomCase) -> UcaResult:
    """Reference curve angles straight from the ground-truth lines."""
    if not case.gt_lines:
        raise ValueError("phantom case has no ground-truth lines")
    return compute_uca(lines_from_segments(case.gt_lines))


# ---------------------------------------------------------------------------
# On-disk case layout
# ---------------------------------------------------------------------------


def write_case(case: PhantomCase, directory: str | os.PathLike, spec: PhantomSpec | None = None) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_heatmap_stack(case.heatmaps, directory)
    save_binary_mask(case.segmap, directory / SEGMAP_FILENAME)
    write_json_atomic(segments_to_doc(list(case.gt_lines)), directory / GT_LINES_FILENAME)
    write_json_atomic(uca_to_doc(case.gt_uca), directory / GT_UCA_FILENAME)
    meta = {"schema": SCHEMA_VERSION, "pixel_spacing": case.pixel_spacing}
    if spec is not None:
        meta["spec"] = spec.to_json_dict()
    write_json_atomic(meta, directory / CASE_META_FILENAME)


def load_case_inputs(directory: str | os.PathLike) -> tuple[HeatmapStack, ScalarRaster]:
    """The pipeline-facing part of a case: heatmaps and segmentation map."""
    directory = Path(directory)
    stack = load_heatmap_stack(directory / "heatmaps.json")
    segmap = load_scalar_raster(directory / SEGMAP_FILENAME)
    return stack, segmap


def load_case_ground_truth(directory: str | os.PathLike) -> tuple[list[LineSegment], UcaResult, float]:
    directory = Path(directory)
    segments = segments_from_doc(read_json(directory / GT_LINES_FILENAME))
    uca = uca_from_doc(read_json(directory / GT_UCA_FILENAME))
    spacing = PHANTOM_PIXEL_SPACING
    meta_path = directory / CASE_META_FILENAME
    if meta_path.exists():
        meta = read_json(meta_path)
        spacing = float(meta.get("pixel_spacing", PHANTOM_PIXEL_SPACING))
    return segments, uca, spacing


def write_dataset(
    spec: PhantomSpec, out_dir: str | os.PathLike, count: int, base_seed: int
) -> list[str]:
    """Generate ``count`` cases seeded base_seed..base_seed+count-1.

    Returns the case directory names listed in the manifest.
    """
    if count < 1:
        raise InputError(f"dataset case count must be >= 1, got {count}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    names = []
    for k in range(count):
        case_spec = replace(spec, seed=base_seed + k)
        case = generate_phantom(case_spec)
        name = f"case_{k:04d}"
        write_case(case, out_dir / name, spec=case_spec)
        names.append(name)
    manifest = {
        "schema": SCHEMA_VERSION,
        "cases": names,
        "base_seed": base_seed,
        "pixel_spacing": PHANTOM_PIXEL_SPACING,
    }
    write_json_atomic(manifest, out_dir / DATASET_MANIFEST_FILENAME)
    return names
