"""Foundational raster types and the probe-centric coordinate system.

All transforms in this package share three conventions fixed here:

- Intensities are normalized reals in [0, 1], stored float64; 8-bit I/O
  converts at the boundary (``normalize_u8`` / ``quantize_u8``).
- Pixel (row, col) maps to normalized coordinates x = col/(width-1),
  y = row/(height-1) so corners land exactly on 0 and 1. The virtual
  probe apex sits at (x, y) = (0.5, 0): top center of the frame.
- Types are immutable after construction (arrays are copied and marked
  read-only), so samples can be shared freely across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ShapeMismatch
from .rng import MASK64, derive_sample_seed  # noqa: F401  (re-exported)

#: ITU-R BT.601 luminance weights for R, G, B.
BT601_WEIGHTS = (0.299, 0.587, 0.114)


@dataclass(frozen=True)
class ImageBuffer:
    """Single-channel intensity raster with values in [0, 1].

    ``data`` is a read-only (height, width) float64 array in row-major
    order.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ShapeMismatch(f"image must be 2-D and nonempty, got shape {arr.shape}")
        arr = arr.astype(np.float64, copy=True, order="C") if (
            arr.dtype != np.float64 or arr.flags.writeable or not arr.flags.c_contiguous
        ) else arr
        if not np.all(np.isfinite(arr)):
            raise ValueError("image intensities must be finite")
        lo = float(arr.min())
        hi = float(arr.max())
        if lo < 0.0 or hi > 1.0:
            raise ValueError(f"image intensities must lie in [0,1], got [{lo}, {hi}]")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple:
        return self.data.shape


@dataclass(frozen=True)
class ScanMask:
    """Binary mask of the region carrying actual ultrasound signal.

    ``data`` is a read-only (height, width) uint8 array with values in
    {0, 1}; 1 marks the scan region.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ShapeMismatch(f"mask must be 2-D and nonempty, got shape {arr.shape}")
        if not np.isin(arr, (0, 1)).all():
            raise ValueError("scan mask values must be 0 or 1")
        arr = arr.astype(np.uint8, copy=True, order="C")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple:
        return self.data.shape


@dataclass(frozen=True)
class LabelMask:
    """Segmentation target: integer class ids, 0 = background."""

    data: np.ndarray
    num_classes: int

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ShapeMismatch(f"mask must be 2-D and nonempty, got shape {arr.shape}")
        if self.num_classes < 1:
            raise ValueError("num_classes must be >= 1")
        cast = arr.astype(np.int32, copy=True, order="C")
        if not np.array_equal(cast, arr):
            raise ValueError("label ids must be integers")
        if cast.min(initial=0) < 0 or cast.max(initial=0) >= self.num_classes:
            raise ValueError("label ids must satisfy 0 <= id < num_classes")
        arr = cast
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple:
        return self.data.shape


@dataclass(frozen=True)
class Sample:
    """The unit flowing through every transform.

    All rasters present must share one shape. ``seed`` is the 64-bit
    stream seed fixed at construction; transforms derive their own
    sub-streams from it and never mutate the sample.
    """

    id: str
    image: ImageBuffer
    scan_mask: Optional[ScanMask] = None
    label_mask: Optional[LabelMask] = None
    label: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        shape = self.image.shape
        for raster in (self.scan_mask, self.label_mask):
            if raster is not None and raster.shape != shape:
                raise ShapeMismatch(
                    f"sample {self.id!r}: raster shape {raster.shape} != image shape {shape}"
                )
        if not 0 <= self.seed <= MASK64:
            raise ValueError("seed must fit in 64 bits")

    def with_rasters(self, image=None, scan_mask=..., label_mask=...) -> "Sample":
        """Copy of this sample with replaced rasters (id/label/seed kept)."""
        return Sample(
            id=self.id,
            image=self.image if image is None else image,
            scan_mask=self.scan_mask if scan_mask is ... else scan_mask,
            label_mask=self.label_mask if label_mask is ... else label_mask,
            label=self.label,
            seed=self.seed,
        )


@dataclass(frozen=True)
class NormalizedPoint:
    """A position in probe-centric normalized coordinates.

    x is the fraction of width, y the fraction of height, both in [0, 1].
    The probe apex is at (0.5, 0).
    """

    x: float
    y: float

    def __post_init__(self):
        if not (0.0 <= self.x <= 1.0 and 0.0 <= self.y <= 1.0):
            raise ValueError(f"normalized coordinates must lie in [0,1], got ({self.x}, {self.y})")


def radial_distance(p: NormalizedPoint) -> float:
    """Distance of a normalized point from the probe apex at (0.5, 0).

    d = sqrt((x - 0.5)^2 + y^2), range [0, sqrt(1.25)].
    """
    return math.sqrt((p.x - 0.5) ** 2 + p.y ** 2)


def normalized_grid(height: int, width: int):
    """Normalized x and y coordinate rasters for a (height, width) frame.

    x = col/(width-1) and y = row/(height-1). Degenerate axes collapse to
    the reference line: a single column sits at x = 0.5 (under the apex),
    a single row at y = 0 (the probe surface).
    """
    if width > 1:
        x = np.arange(width, dtype=np.float64) / (width - 1)
    else:
        x = np.full(1, 0.5)
    if height > 1:
        y = np.arange(height, dtype=np.float64) / (height - 1)
    else:
        y = np.zeros(1)
    return np.broadcast_to(x, (height, width)), np.broadcast_to(y[:, None], (height, width))


def radial_distance_grid(height: int, width: int) -> np.ndarray:
    """Raster of radial distances from the probe apex, same convention as
    ``radial_distance``."""
    x, y = normalized_grid(height, width)
    return np.sqrt((x - 0.5) ** 2 + y ** 2)


def normalize_u8(raw: np.ndarray) -> ImageBuffer:
    """Exact 8-bit to normalized conversion: out = raw / 255."""
    arr = np.asarray(raw)
    if arr.dtype != np.uint8:
        if arr.min(initial=0) < 0 or arr.max(initial=0) > 255:
            raise ValueError("raw values must lie in [0, 255]")
    return ImageBuffer(arr.astype(np.float64) / 255.0)


def quantize_u8(image: ImageBuffer) -> np.ndarray:
    """Inverse boundary conversion: round to the nearest 8-bit level."""
    return np.round(image.data * 255.0).astype(np.uint8)


def luminance(rgb: np.ndarray) -> np.ndarray:
    """Reduce an (H, W, 3) or (H, W, 4) float array to one channel.

    Uses ITU-R BT.601 weights on the first three channels; any alpha
    channel is ignored. Input and output are in the same value scale.
    """
    arr = np.asarray(rgb, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] < 3:
        raise ShapeMismatch(f"expected (H, W, 3+) array, got shape {arr.shape}")
    r, g, b = arr[..., 0], arr[..., 1], arr[..., 2]
    w = BT601_WEIGHTS
    return w[0] * r + w[1] * g + w[2] * b
