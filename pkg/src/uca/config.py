"""Pipeline configuration: one JSON document, every knob in one place.

Defaults follow the constants the pipeline was tuned with: gamma 10,
dilation kernel 3, EDE scale 100, the 10-degree curve threshold, and the
3.5 mm correctness rule.  The document round-trips losslessly.
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass
from pathlib import Path

from .affinity import ClusterParams, DEFAULT_CONNECTIVITY, DEFAULT_GAMMA
from .angle import DEFAULT_ANGLE_THRESHOLD_DEG
from .errors import ConfigError
from .heatmap import DEFAULT_NMS_RADIUS, DEFAULT_PEAK_THRESHOLD, DEFAULT_SIGMA, PeakParams
from .matching import DEFAULT_DROP_RATIO, DEFAULT_NUM_SAMPLES, MatchParams
from .metrics import DEFAULT_CORRECT_THRESHOLD_MM, DEFAULT_EDE_SCALE, DEFAULT_PIXEL_SPACING, EdeParams
from .pseudomask import DEFAULT_KERNEL_SIZE
from .serialize import SCHEMA_VERSION, read_json, write_json_atomic


@dataclass(frozen=True)
class PipelineConfig:
    sigma: float = DEFAULT_SIGMA
    peak_threshold: float = DEFAULT_PEAK_THRESHOLD
    nms_radius: int = DEFAULT_NMS_RADIUS
    gamma: int = DEFAULT_GAMMA
    connectivity: int = DEFAULT_CONNECTIVITY
    kernel_size: int = DEFAULT_KERNEL_SIZE
    num_samples: int = DEFAULT_NUM_SAMPLES
    drop_ratio: float = DEFAULT_DROP_RATIO
    max_pair_distance: float | None = None  # None resolves to half the image width
    angle_threshold_deg: float = DEFAULT_ANGLE_THRESHOLD_DEG
    pixel_spacing: float = DEFAULT_PIXEL_SPACING
    ede_s: float = DEFAULT_EDE_SCALE
    correct_threshold_mm: float = DEFAULT_CORRECT_THRESHOLD_MM

    def __post_init__(self) -> None:
        try:
            self.peak_params()
            self.cluster_params()
            self.match_params()
            self.ede_params()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ConfigError(f"kernel_size must be a positive odd integer, got {self.kernel_size}")
        if self.angle_threshold_deg < 0:
            raise ConfigError(
                f"angle_threshold_deg must be >= 0, got {self.angle_threshold_deg}"
            )

    def peak_params(self) -> PeakParams:
        return PeakParams(
            sigma=self.sigma, peak_threshold=self.peak_threshold, nms_radius=self.nms_radius
        )

    def cluster_params(self) -> ClusterParams:
        return ClusterParams(gamma=self.gamma, connectivity=self.connectivity)

    def match_params(self) -> MatchParams:
        return MatchParams(
            num_samples=self.num_samples,
            drop_ratio=self.drop_ratio,
            max_pair_distance=self.max_pair_distance,
        )

    def ede_params(self, pixel_spacing: float | None = None) -> EdeParams:
        return EdeParams(
            s=self.ede_s,
            pixel_spacing=self.pixel_spacing if pixel_spacing is None else pixel_spacing,
            correct_threshold_mm=self.correct_threshold_mm,
        )

    def to_json_dict(self) -> dict:
        doc = asdict(self)
        doc["schema"] = SCHEMA_VERSION
        return doc

    @classmethod
    def from_json_dict(cls, doc: dict) -> "PipelineConfig":
        doc = dict(doc)
        doc.pop("schema", None)
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {', '.join(sorted(unknown))}")
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError(f"malformed config document: {exc}") from exc

    def save(self, path: str | os.PathLike) -> None:
        write_json_atomic(self.to_json_dict(), path)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "PipelineConfig":
        path = Path(path)
        try:
            doc = read_json(path)
        except Exception as exc:
            raise ConfigError(f"cannot load config {path}: {exc}") from exc
        return cls.from_json_dict(doc)
