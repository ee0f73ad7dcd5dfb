"""Core raster and geometry types plus deterministic file I/O.

Coordinate convention: x grows rightward, y grows downward, the origin is
the center of the top-left pixel.  Scalar rasters hold float64 values and
are exchanged on disk as 16-bit grayscale (PGM P5 or PNG); vector rasters
persist as two scalar rasters plus a JSON sidecar naming the components.

All container types are immutable after construction (backing numpy arrays
are marked read-only), so instances can be shared freely across threads.
"""

from __future__ import annotations

import json
import math
import os
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import DimensionMismatchError, RasterFormatError

# Hard cap on decoded raster size: protects against malformed headers
# declaring absurd dimensions.
MAX_PIXELS = 64_000_000

_U16_MAX = 65535


class Side(str, Enum):
    LEFT = "left"
    RIGHT = "right"


class Region(str, Enum):
    THORACIC = "thoracic"
    LUMBAR = "lumbar"


@dataclass(frozen=True)
class Point2:
    """Sub-pixel 2-D point in image coordinates (x right, y down)."""

    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"point coordinates must be finite, got ({self.x}, {self.y})")

    def distance_to(self, other: "Point2") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class ScalarRaster:
    """Row-major scalar grid; ``values`` has shape (height, width)."""

    width: int
    height: int
    values: np.ndarray

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ValueError(f"raster dimensions must be >= 1, got {self.width}x{self.height}")
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != (self.height, self.width):
            raise DimensionMismatchError(
                f"values shape {vals.shape} does not match {self.height}x{self.width}"
            )
        object.__setattr__(self, "values", _freeze(vals))

    @classmethod
    def from_array(cls, values: np.ndarray) -> "ScalarRaster":
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError(f"expected a 2-D array, got shape {values.shape}")
        return cls(width=values.shape[1], height=values.shape[0], values=values)

    @classmethod
    def zeros(cls, width: int, height: int) -> "ScalarRaster":
        return cls(width=width, height=height, values=np.zeros((height, width)))

    def is_binary(self) -> bool:
        v = self.values
        return bool(np.all((v == 0.0) | (v == 1.0)))


@dataclass(frozen=True)
class VectorRaster:
    """Row-major grid of 2-vectors; ``values`` has shape (height, width, 2)."""

    width: int
    height: int
    values: np.ndarray

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ValueError(f"raster dimensions must be >= 1, got {self.width}x{self.height}")
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != (self.height, self.width, 2):
            raise DimensionMismatchError(
                f"values shape {vals.shape} does not match {self.height}x{self.width}x2"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("vector raster contains non-finite components")
        object.__setattr__(self, "values", _freeze(vals))

    @classmethod
    def zeros(cls, width: int, height: int) -> "VectorRaster":
        return cls(width=width, height=height, values=np.zeros((height, width, 2)))


@dataclass(frozen=True)
class Landmark:
    """Detected candidate point with side/region labels and a confidence."""

    position: Point2
    side: Side
    region: Region
    confidence: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence}")


@dataclass(frozen=True)
class LineSegment:
    """Per-vertebra line with canonical orientation left.x <= right.x."""

    left: Point2
    right: Point2
    region: Region

    def __post_init__(self) -> None:
        if self.left.x > self.right.x:
            raise ValueError(
                f"segment endpoints are not in canonical order: "
                f"left.x={self.left.x} > right.x={self.right.x}"
            )

    @classmethod
    def ordered(cls, a: Point2, b: Point2, region: Region) -> "LineSegment":
        """Build a segment from two endpoints in either order."""
        if a.x <= b.x:
            return cls(left=a, right=b, region=region)
        return cls(left=b, right=a, region=region)

    def midpoint(self) -> Point2:
        return Point2((self.left.x + self.right.x) / 2.0, (self.left.y + self.right.y) / 2.0)


# ---------------------------------------------------------------------------
# Bilinear sampling
# ---------------------------------------------------------------------------


def bilinear_sample(raster: ScalarRaster | VectorRaster, p: Point2):
    """Bilinearly interpolate the raster at a sub-pixel point.

    The point must lie inside [0, width-1] x [0, height-1]; exact grid
    points return the stored value.  Returns a float for scalar rasters and
    a length-2 ndarray for vector rasters.
    """
    if not (0.0 <= p.x <= raster.width - 1 and 0.0 <= p.y <= raster.height - 1):
        raise ValueError(
            f"sample point ({p.x}, {p.y}) outside raster bounds "
            f"{raster.width}x{raster.height}"
        )
    out = bilinear_sample_many(raster, np.array([p.x]), np.array([p.y]))
    if isinstance(raster, ScalarRaster):
        return float(out[0])
    return out[0]


def bilinear_sample_many(raster: ScalarRaster | VectorRaster, xs: np.ndarray, ys: np.ndarray):
    """Vectorized bilinear sampling; coordinates are clamped to the border."""
    w, h = raster.width, raster.height
    xs = np.clip(xs, 0.0, w - 1.0)
    ys = np.clip(ys, 0.0, h - 1.0)
    x0 = np.minimum(np.floor(xs).astype(np.intp), max(w - 2, 0))
    y0 = np.minimum(np.floor(ys).astype(np.intp), max(h - 2, 0))
    fx = xs - x0
    fy = ys - y0
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    v = raster.values
    if isinstance(raster, VectorRaster):
        fx = fx[:, None]
        fy = fy[:, None]
    return (
        v[y0, x0] * (1.0 - fx) * (1.0 - fy)
        + v[y0, x1] * fx * (1.0 - fy)
        + v[y1, x0] * (1.0 - fx) * fy
        + v[y1, x1] * fx * fy
    )


# ---------------------------------------------------------------------------
# Scalar raster file I/O (PGM P5 and grayscale PNG)
# ---------------------------------------------------------------------------


def load_scalar_raster(path: str | os.PathLike) -> ScalarRaster:
    """Load a scalar raster from PGM (P5) or grayscale PNG.

    The format is sniffed from the file's magic bytes, not its extension.
    Integer samples are normalized to [0, 1] by the format's max value.
    """
    path = Path(path)
    try:
        data = path.read_bytes()
    except FileNotFoundError:
        raise RasterFormatError(f"raster file not found: {path}") from None
    except OSError as exc:
        raise RasterFormatError(f"cannot read raster file {path}: {exc}") from exc
    if data.startswith(b"P5"):
        return _decode_pgm(data, path)
    if data.startswith(b"\x89PNG\r\n\x1a\n"):
        return _decode_png(path)
    raise RasterFormatError(f"unrecognized raster format in {path}")


def save_scalar_raster(raster: ScalarRaster, path: str | os.PathLike) -> None:
    """Save a raster losslessly at 16-bit quantization.

    Values are clipped to [0, 1] and quantized to 16 bits.  ``.png`` paths
    get PNG output; anything else is written as binary PGM (P5).  The file
    is written atomically (temp file + rename).
    """
    path = Path(path)
    q = np.clip(raster.values, 0.0, 1.0)
    q16 = np.round(q * _U16_MAX).astype(np.uint16)
    if path.suffix.lower() == ".png":
        from PIL import Image

        tmp = path.with_name(path.name + ".tmp")
        Image.fromarray(q16).save(tmp, format="PNG")
        os.replace(tmp, path)
        return
    header = f"P5\n{raster.width} {raster.height}\n{_U16_MAX}\n".encode("ascii")
    payload = header + q16.astype(">u2").tobytes()
    _write_bytes_atomic(path, payload)


def save_binary_mask(mask: ScalarRaster, path: str | os.PathLike) -> None:
    """Save a binary mask as 8-bit grayscale with values {0, 255}."""
    path = Path(path)
    v = mask.values
    if not np.all((v == 0.0) | (v == 1.0)):
        raise ValueError("save_binary_mask expects a binary raster")
    q8 = (v * 255).astype(np.uint8)
    if path.suffix.lower() == ".png":
        from PIL import Image

        tmp = path.with_name(path.name + ".tmp")
        Image.fromarray(q8, mode="L").save(tmp, format="PNG")
        os.replace(tmp, path)
        return
    header = f"P5\n{mask.width} {mask.height}\n255\n".encode("ascii")
    _write_bytes_atomic(path, header + q8.tobytes())


def _write_bytes_atomic(path: Path, payload: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(payload)
    os.replace(tmp, path)


def _decode_pgm(data: bytes, path: Path) -> ScalarRaster:
    # Header: "P5" <ws> width <ws> height <ws> maxval <single ws>, with
    # '#' comments allowed between tokens.
    pos = 2
    tokens: list[int] = []
    while len(tokens) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            nl = data.find(b"\n", pos)
            if nl < 0:
                raise RasterFormatError(f"unterminated comment in PGM header: {path}")
            pos = nl + 1
            continue
        m = re.match(rb"\d+", data[pos:])
        if not m:
            raise RasterFormatError(f"malformed PGM header in {path}")
        tokens.append(int(m.group(0)))
        pos += m.end()
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise RasterFormatError(f"malformed PGM header in {path}")
    pos += 1
    width, height, maxval = tokens
    if width < 1 or height < 1 or not 0 < maxval < 65536:
        raise RasterFormatError(f"invalid PGM dimensions/maxval in {path}")
    if width * height > MAX_PIXELS:
        raise RasterFormatError(f"raster dimensions overflow sanity cap: {width}x{height}")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    expected = width * height * dtype.itemsize
    body = data[pos : pos + expected]
    if len(body) != expected:
        raise RasterFormatError(
            f"truncated PGM payload in {path}: expected {expected} bytes, got {len(body)}"
        )
    samples = np.frombuffer(body, dtype=dtype).astype(np.float64).reshape(height, width)
    return ScalarRaster(width=width, height=height, values=samples / maxval)


def _decode_png(path: Path) -> ScalarRaster:
    from PIL import Image

    try:
        with Image.open(path) as img:
            img.load()
            mode = img.mode
            arr = np.asarray(img)
    except Exception as exc:
        raise RasterFormatError(f"cannot decode PNG {path}: {exc}") from exc
    if arr.ndim != 2:
        raise RasterFormatError(f"PNG {path} is not single-channel grayscale (mode {mode})")
    if arr.size > MAX_PIXELS:
        raise RasterFormatError(f"raster dimensions overflow sanity cap: {arr.shape}")
    if mode == "L":
        scale = 255.0
    elif mode in ("I;16", "I;16B", "I"):
        scale = float(_U16_MAX)
    else:
        raise RasterFormatError(f"unsupported PNG mode {mode!r} in {path}")
    return ScalarRaster.from_array(arr.astype(np.float64) / scale)


# ---------------------------------------------------------------------------
# Vector raster file I/O: two scalar rasters + JSON sidecar
# ---------------------------------------------------------------------------


def save_vector_raster(raster: VectorRaster, path: str | os.PathLike) -> None:
    """Persist a vector raster as x/y component files plus a JSON sidecar.

    Components are shifted from [-1, 1] into [0, 1] before quantization so
    unit vectors survive the 16-bit scalar codec.
    """
    path = Path(path)
    stem = path.with_suffix("")
    x_path = stem.with_name(stem.name + "_x.pgm")
    y_path = stem.with_name(stem.name + "_y.pgm")
    comp = (raster.values + 1.0) / 2.0
    save_scalar_raster(ScalarRaster.from_array(comp[:, :, 0]), x_path)
    save_scalar_raster(ScalarRaster.from_array(comp[:, :, 1]), y_path)
    sidecar = {
        "schema": 1,
        "width": raster.width,
        "height": raster.height,
        "x_component": x_path.name,
        "y_component": y_path.name,
        "value_range": [-1.0, 1.0],
    }
    _write_bytes_atomic(path, (json.dumps(sidecar, indent=2, sort_keys=True) + "\n").encode())


def load_vector_raster(path: str | os.PathLike) -> VectorRaster:
    path = Path(path)
    try:
        sidecar = json.loads(path.read_text())
    except FileNotFoundError:
        raise RasterFormatError(f"vector raster sidecar not found: {path}") from None
    except (OSError, json.JSONDecodeError) as exc:
        raise RasterFormatError(f"cannot parse vector raster sidecar {path}: {exc}") from exc
    try:
        x = load_scalar_raster(path.parent / sidecar["x_component"])
        y = load_scalar_raster(path.parent / sidecar["y_component"])
        lo, hi = sidecar["value_range"]
    except KeyError as exc:
        raise RasterFormatError(f"vector raster sidecar {path} missing field {exc}") from exc
    if x.width != y.width or x.height != y.height:
        raise DimensionMismatchError(f"vector raster components disagree on size in {path}")
    values = np.stack([x.values, y.values], axis=-1) * (hi - lo) + lo
    return VectorRaster(width=x.width, height=x.height, values=values)
