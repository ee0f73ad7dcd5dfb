"""Vertebra line detection and automatic ultrasound curve angle measurement.

The package turns multi-channel landmark heatmaps plus a vertebra
segmentation map into per-vertebra line segments and curve angles:
heatmap peaks become left/right candidates, the segmentation foreground is
clustered into per-vertebra affinity vectors, candidates are paired by
line integrals and optimal assignment, and the matched lines are parsed
into curve angles.  A synthetic phantom generator provides exact ground
truth, and the metrics module scores predictions against it.
"""

from .affinity import ClusterParams, VertebraCluster, build_affinity_map, cluster_foreground, split_centroids
from .angle import UcaCurve, UcaResult, VertebraLine, compute_uca, find_extremal_lines, line_slope
from .config import PipelineConfig
from .errors import (
    ConfigError,
    DegenerateClusterError,
    DimensionMismatchError,
    InputError,
    PhantomSpecError,
    RasterFormatError,
    UcaError,
)
from .heatmap import HeatmapStack, PeakParams, extract_peaks, render_gaussian_channel
from .matching import MatchParams, PairConfidence, hungarian_assign, line_integral_confidence, match_candidates
from .metrics import (
    AgreementReport,
    EdeParams,
    LineEvalReport,
    angle_agreement,
    dice_overlap,
    endpoint_distance_error,
    evaluate_lines,
)
from .phantom import CurveComponent, PhantomCase, PhantomSpec, generate_phantom, oracle_uca
from .pipeline import PipelineResult, run_case
from .pseudomask import DilationKernel, build_pseudo_mask, dilate, rasterize_segment
from .raster import (
    Landmark,
    LineSegment,
    Point2,
    Region,
    ScalarRaster,
    Side,
    VectorRaster,
    bilinear_sample,
    load_scalar_raster,
    save_scalar_raster,
)

__version__ = "0.1.0"

__all__ = [
    "AgreementReport",
    "ClusterParams",
    "ConfigError",
    "CurveComponent",
    "DegenerateClusterError",
    "DilationKernel",
    "DimensionMismatchError",
    "EdeParams",
    "HeatmapStack",
    "InputError",
    "Landmark",
    "LineEvalReport",
    "LineSegment",
    "MatchParams",
    "PairConfidence",
    "PeakParams",
    "PhantomCase",
    "PhantomSpec",
    "PhantomSpecError",
    "PipelineConfig",
    "PipelineResult",
    "Point2",
    "RasterFormatError",
    "Region",
    "ScalarRaster",
    "Side",
    "UcaCurve",
    "UcaError",
    "UcaResult",
    "VectorRaster",
    "VertebraCluster",
    "VertebraLine",
    "angle_agreement",
    "bilinear_sample",
    "build_affinity_map",
    "build_pseudo_mask",
    "cluster_foreground",
    "compute_uca",
    "dice_overlap",
    "dilate",
    "endpoint_distance_error",
    "evaluate_lines",
    "extract_peaks",
    "find_extremal_lines",
    "generate_phantom",
    "hungarian_assign",
    "line_integral_confidence",
    "line_slope",
    "load_scalar_raster",
    "match_candidates",
    "oracle_uca",
    "rasterize_segment",
    "render_gaussian_channel",
    "run_case",
    "save_scalar_raster",
    "split_centroids",
]
