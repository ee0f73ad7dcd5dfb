"""Affinity clustering over a binary segmentation map.

Foreground pixels are grouped into connected components (4- or
8-connectivity); components smaller than ``gamma`` pixels are discarded as
noise.  Each surviving cluster is split into a left and a right
subsequence by proximity to its extreme-x pixels, the two subsequence
centroids are computed, and every cluster pixel receives the unit vector
pointing from the left centroid to the right centroid.  Pixels outside any
cluster carry the zero vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateClusterError
from .raster import Point2, ScalarRaster, VectorRaster

DEFAULT_GAMMA = 10
DEFAULT_CONNECTIVITY = 8

_MIN_CENTROID_SEPARATION = 1e-6


@dataclass(frozen=True)
class ClusterParams:
    gamma: int = DEFAULT_GAMMA
    connectivity: int = DEFAULT_CONNECTIVITY

    def __post_init__(self) -> None:
        if self.gamma < 1:
            raise ValueError(f"gamma must be >= 1, got {self.gamma}")
        if self.connectivity not in (4, 8):
            raise ValueError(f"connectivity must be 4 or 8, got {self.connectivity}")


@dataclass(frozen=True)
class VertebraCluster:
    """A vertebra-sized component with its left/right centroids.

    ``pixels`` is an (n, 2) integer array with columns (x, y).
    """

    pixels: np.ndarray
    c_left: Point2
    c_right: Point2

    def __post_init__(self) -> None:
        pix = np.asarray(self.pixels, dtype=np.intp)
        if pix.ndim != 2 or pix.shape[1] != 2 or pix.shape[0] < 1:
            raise ValueError(f"pixels must be a nonempty (n, 2) array, got shape {pix.shape}")
        if self.c_left.x > self.c_right.x:
            raise ValueError("cluster centroids are not in canonical order")
        lo = pix.min(axis=0)
        hi = pix.max(axis=0)
        for c in (self.c_left, self.c_right):
            if not (lo[0] <= c.x <= hi[0] and lo[1] <= c.y <= hi[1]):
                raise ValueError(f"centroid ({c.x}, {c.y}) outside cluster bounding box")
        pix = np.ascontiguousarray(pix)
        pix.flags.writeable = False
        object.__setattr__(self, "pixels", pix)

    def to_json_dict(self) -> dict:
        lo = self.pixels.min(axis=0)
        hi = self.pixels.max(axis=0)
        return {
            "pixel_count": int(self.pixels.shape[0]),
            "c_left": {"x": self.c_left.x, "y": self.c_left.y},
            "c_right": {"x": self.c_right.x, "y": self.c_right.y},
            "bbox": {"x0": int(lo[0]), "y0": int(lo[1]), "x1": int(hi[0]), "y1": int(hi[1])},
        }


class _UnionFind:
    __slots__ = ("parent",)

    def __init__(self) -> None:
        self.parent: list[int] = []

    def make(self) -> int:
        self.parent.append(len(self.parent))
        return len(self.parent) - 1

    def find(self, a: int) -> int:
        parent = self.parent
        root = a
        while parent[root] != root:
            root = parent[root]
        while parent[a] != root:  # path compression
            parent[a], a = root, parent[a]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def cluster_foreground(segmap: ScalarRaster, params: ClusterParams) -> list[np.ndarray]:
    """Connected components of the foreground, noise-filtered by gamma.

    Returns one (n, 2) array of (x, y) pixel coordinates per component with
    at least ``gamma`` pixels, sorted top-to-bottom by centroid y (ties by
    centroid x).
    """
    if not segmap.is_binary():
        raise ValueError("cluster_foreground expects a binary segmentation map")
    h, w = segmap.height, segmap.width
    fg = segmap.values != 0.0
    coords = np.argwhere(fg)  # (y, x) in row-major scan order
    labels = np.full((h, w), -1, dtype=np.intp)
    uf = _UnionFind()
    diag = params.connectivity == 8
    for y, x in coords:
        best = -1
        # Neighbors already visited in scan order: W and N (plus NW/NE for 8).
        if x > 0 and labels[y, x - 1] >= 0:
            best = labels[y, x - 1]
        if y > 0:
            if labels[y - 1, x] >= 0:
                best = labels[y - 1, x] if best < 0 else best
                uf.union(best, labels[y - 1, x])
            if diag:
                if x > 0 and labels[y - 1, x - 1] >= 0:
                    best = labels[y - 1, x - 1] if best < 0 else best
                    uf.union(best, labels[y - 1, x - 1])
                if x < w - 1 and labels[y - 1, x + 1] >= 0:
                    best = labels[y - 1, x + 1] if best < 0 else best
                    uf.union(best, labels[y - 1, x + 1])
        labels[y, x] = uf.make() if best < 0 else best

    if coords.shape[0] == 0:
        return []
    groups: dict[int, list[tuple[int, int]]] = {}
    for y, x in coords:
        root = uf.find(labels[y, x])
        groups.setdefault(root, []).append((x, y))
    clusters = [
        np.array(pixels, dtype=np.intp) for pixels in groups.values() if len(pixels) >= params.gamma
    ]
    clusters.sort(key=lambda pix: (pix[:, 1].mean(), pix[:, 0].mean()))
    return clusters


def split_centroids(pixels: np.ndarray) -> tuple[Point2, Point2]:
    """Split a cluster by proximity to its extreme-x pixels and average.

    Every pixel joins the subsequence of whichever extreme pixel (smallest
    x vs largest x, ties broken by smaller y) is nearer; equidistant pixels
    go left.  Returns the subsequence means ordered so c_left.x <= c_right.x.
    """
    pix = np.asarray(pixels, dtype=np.float64)
    if pix.ndim != 2 or pix.shape[1] != 2 or pix.shape[0] < 2:
        raise ValueError(f"need at least two (x, y) pixels, got shape {pix.shape}")
    xs, ys = pix[:, 0], pix[:, 1]
    if np.all(xs == xs[0]):
        raise DegenerateClusterError("cluster spans a single x column; cannot split left/right")
    order = np.lexsort((ys, xs))  # by x ascending, ties by y ascending
    p_min = pix[order[0]]
    max_block = order[xs[order] == xs[order[-1]]]
    p_max = pix[max_block[0]]  # smallest y within the largest-x column

    d_left = ((pix - p_min) ** 2).sum(axis=1)
    d_right = ((pix - p_max) ** 2).sum(axis=1)
    left_mask = d_left <= d_right  # ties go left
    c_a = pix[left_mask].mean(axis=0)
    c_b = pix[~left_mask].mean(axis=0)
    if c_a[0] > c_b[0]:
        c_a, c_b = c_b, c_a
    return Point2(float(c_a[0]), float(c_a[1])), Point2(float(c_b[0]), float(c_b[1]))


def make_cluster(pixels: np.ndarray) -> VertebraCluster:
    """Attach split centroids to a raw pixel component."""
    c_left, c_right = split_centroids(pixels)
    return VertebraCluster(pixels=pixels, c_left=c_left, c_right=c_right)


def build_affinity_map(clusters: list[VertebraCluster], width: int, height: int) -> VectorRaster:
    """Unit left-to-right centroid direction on cluster pixels, zero elsewhere."""
    values = np.zeros((height, width, 2))
    for cluster in clusters:
        dx = cluster.c_right.x - cluster.c_left.x
        dy = cluster.c_right.y - cluster.c_left.y
        norm = float(np.hypot(dx, dy))
        if norm < _MIN_CENTROID_SEPARATION:
            raise DegenerateClusterError(
                f"cluster centroids coincide (separation {norm:.2e} px)"
            )
        xs = cluster.pixels[:, 0]
        ys = cluster.pixels[:, 1]
        values[ys, xs, 0] = dx / norm
        values[ys, xs, 1] = dy / norm
    return VectorRaster(width=width, height=height, values=values)
