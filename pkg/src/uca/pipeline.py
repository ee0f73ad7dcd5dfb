"""End-to-end inference: heatmaps + segmentation map -> lines -> curve angles.

Per region, left/right candidates extracted from the heatmap channels are
paired over the clustered affinity map; the per-region lines are merged
top-to-bottom and parsed into curve angles.  Clusters that cannot yield a
left/right split (single-column or coincident centroids) are treated as
noise and skipped rather than aborting the scan.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .affinity import VertebraCluster, build_affinity_map, cluster_foreground, make_cluster
from .angle import UcaResult, VertebraLine, compute_uca
from .config import PipelineConfig
from .errors import DegenerateClusterError, DimensionMismatchError
from .heatmap import HeatmapStack, extract_peaks
from .matching import match_candidates
from .raster import Landmark, Region, ScalarRaster, Side, VectorRaster


@dataclass(frozen=True)
class PipelineResult:
    landmarks: tuple[Landmark, ...]
    lines: tuple[VertebraLine, ...]
    uca: UcaResult
    clusters: tuple[VertebraCluster, ...]


def binarize(segmap: ScalarRaster, threshold: float = 0.5) -> ScalarRaster:
    """Threshold a soft segmentation map into the binary mask clustering expects."""
    return ScalarRaster.from_array((segmap.values >= threshold).astype(np.float64))


def build_clusters(segmap: ScalarRaster, config: PipelineConfig) -> list[VertebraCluster]:
    clusters = []
    for pixels in cluster_foreground(segmap, config.cluster_params()):
        try:
            cluster = make_cluster(pixels)
        except DegenerateClusterError:
            continue  # single-column blob: noise, not a vertebra
        if cluster.c_left.distance_to(cluster.c_right) < 1e-6:
            continue  # coincident centroids carry no direction
        clusters.append(cluster)
    return clusters


def run_case(stack: HeatmapStack, segmap: ScalarRaster, config: PipelineConfig) -> PipelineResult:
    """Run detection, grouping, matching, and angle parsing on one scan."""
    if segmap.width != stack.width or segmap.height != stack.height:
        raise DimensionMismatchError(
            f"segmentation map is {segmap.width}x{segmap.height}, "
            f"heatmaps are {stack.width}x{stack.height}"
        )
    peak_params = config.peak_params()
    landmarks: list[Landmark] = []
    by_channel: dict[tuple[Region, Side], list[Landmark]] = {}
    for region in (Region.THORACIC, Region.LUMBAR):
        for side in (Side.LEFT, Side.RIGHT):
            found = extract_peaks(stack.channel(region, side), peak_params, side, region)
            by_channel[(region, side)] = found
            landmarks.extend(found)

    clusters = build_clusters(binarize(segmap), config)
    affinity = build_affinity_map(clusters, segmap.width, segmap.height)

    lines: list[VertebraLine] = []
    for region in (Region.THORACIC, Region.LUMBAR):
        lines.extend(
            match_candidates(
                by_channel[(region, Side.LEFT)],
                by_channel[(region, Side.RIGHT)],
                affinity,
                config.match_params(),
            )
        )
    lines.sort(key=lambda ln: (ln.midpoint().y, ln.midpoint().x))

    uca = compute_uca(lines, config.angle_threshold_deg)
    return PipelineResult(
        landmarks=tuple(landmarks),
        lines=tuple(lines),
        uca=uca,
        clusters=tuple(clusters),
    )


def affinity_map_for(segmap: ScalarRaster, config: PipelineConfig) -> VectorRaster:
    """Clustered affinity map of a (soft or binary) segmentation map."""
    return build_affinity_map(build_clusters(binarize(segmap), config), segmap.width, segmap.height)
