"""Standard image augmentations and preprocessing.

Ten conventional transforms (flip x2, rotate, translate, zoom, random
crop, brightness, contrast, gamma, gaussian noise) plus the evaluation
preprocessing step. Conventions shared by all geometric ops:

- one parameter draw co-transforms image, scan mask, and label mask;
- images interpolate bilinearly, masks nearest-neighbor (label sets stay
  closed under warping);
- out-of-domain pixels become 0 (image) / background (masks);
- fractional pixel shifts round half away from zero;
- rotation and zoom pivot on the image center ((h-1)/2, (w-1)/2).

Photometric ops touch only the image; masks pass through as the same
objects, bit-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import ndimage as ndi

from .core import ImageBuffer, LabelMask, Sample, ScanMask
from .errors import ShapeMismatch

#: Default sampling ranges (uniform low/high) for policy-driven draws.
ANGLE_RANGE = (-30.0, 30.0)
SHIFT_RANGE = (-0.0625, 0.0625)
SCALE_RANGE = (-0.1, 0.1)
BRIGHTNESS_RANGE = (-0.2, 0.2)
CONTRAST_RANGE = (-0.2, 0.2)
GAMMA_RANGE = (0.8, 1.2)
NOISE_SIGMA = 0.15

#: Preprocessing geometry.
TARGET_SIZE = 224
CROP_SOURCE_SIZE = 256


@dataclass(frozen=True)
class GeometricParams:
    """One sampled set of geometric strengths (policy ranges)."""

    angle: float = 0.0
    shift_x: float = 0.0
    shift_y: float = 0.0
    scale_delta: float = 0.0
    crop_origin: Optional[Tuple[int, int]] = None

    def __post_init__(self):
        if not ANGLE_RANGE[0] <= self.angle <= ANGLE_RANGE[1]:
            raise ValueError(f"angle out of range {ANGLE_RANGE}")
        for shift in (self.shift_x, self.shift_y):
            if not SHIFT_RANGE[0] <= shift <= SHIFT_RANGE[1]:
                raise ValueError(f"shift out of range {SHIFT_RANGE}")
        if not SCALE_RANGE[0] <= self.scale_delta <= SCALE_RANGE[1]:
            raise ValueError(f"scale_delta out of range {SCALE_RANGE}")
        if self.crop_origin is not None:
            row, col = self.crop_origin
            if row < 0 or col < 0:
                raise ValueError("crop_origin must be non-negative")


@dataclass(frozen=True)
class PhotometricParams:
    """One sampled set of photometric strengths (policy ranges)."""

    brightness: float = 0.0
    contrast: float = 0.0
    gamma: float = 1.0
    noise_sigma: float = NOISE_SIGMA

    def __post_init__(self):
        if not BRIGHTNESS_RANGE[0] <= self.brightness <= BRIGHTNESS_RANGE[1]:
            raise ValueError(f"brightness out of range {BRIGHTNESS_RANGE}")
        if not CONTRAST_RANGE[0] <= self.contrast <= CONTRAST_RANGE[1]:
            raise ValueError(f"contrast out of range {CONTRAST_RANGE}")
        if not GAMMA_RANGE[0] <= self.gamma <= GAMMA_RANGE[1]:
            raise ValueError(f"gamma out of range {GAMMA_RANGE}")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")


def _round_half_away(value: float) -> int:
    return int(math.copysign(math.floor(abs(value) + 0.5), value))


def _resize(arr: np.ndarray, out_h: int, out_w: int, order: int) -> np.ndarray:
    """Resample to (out_h, out_w) under the half-pixel convention.

    Identical target dims return the input unchanged so no-op resizes
    stay bit-exact.
    """
    in_h, in_w = arr.shape
    if (in_h, in_w) == (out_h, out_w):
        return arr
    rows = (np.arange(out_h, dtype=np.float64) + 0.5) * (in_h / out_h) - 0.5
    cols = (np.arange(out_w, dtype=np.float64) + 0.5) * (in_w / out_w) - 0.5
    grid_r = np.broadcast_to(rows[:, None], (out_h, out_w))
    grid_c = np.broadcast_to(cols[None, :], (out_h, out_w))
    return ndi.map_coordinates(arr, [grid_r, grid_c], order=order, mode="nearest")


def _warp(arr: np.ndarray, src_rows: np.ndarray, src_cols: np.ndarray,
          order: int) -> np.ndarray:
    return ndi.map_coordinates(arr, [src_rows, src_cols], order=order,
                               mode="constant", cval=0)


def _map_rasters(sample: Sample, image_fn, mask_fn) -> Sample:
    """Apply one geometric mapping to every raster the sample carries."""
    image = ImageBuffer(image_fn(sample.image.data))
    scan = None
    if sample.scan_mask is not None:
        scan = ScanMask(mask_fn(sample.scan_mask.data))
    label = None
    if sample.label_mask is not None:
        label = LabelMask(mask_fn(sample.label_mask.data),
                          sample.label_mask.num_classes)
    return sample.with_rasters(image=image, scan_mask=scan, label_mask=label)


def preprocess(sample: Sample, crop_mode: bool = False) -> Sample:
    """Bring a sample to evaluation geometry.

    Default: aspect-preserving resize so the longest side is 224
    (bilinear image, nearest masks; short side rounds to nearest pixel),
    then symmetric zero-pad to 224x224 (smaller pad before).
    crop_mode=True instead resizes non-aspect-preserving to 256x256,
    leaving the 224x224 window to ``random_crop``.
    """
    in_h, in_w = sample.image.shape
    if crop_mode:
        out_h = out_w = CROP_SOURCE_SIZE
        pad = ((0, 0), (0, 0))
    else:
        if in_w >= in_h:
            out_w = TARGET_SIZE
            out_h = max(1, int(math.floor(in_h * TARGET_SIZE / in_w + 0.5)))
        else:
            out_h = TARGET_SIZE
            out_w = max(1, int(math.floor(in_w * TARGET_SIZE / in_h + 0.5)))
        pad_h = TARGET_SIZE - out_h
        pad_w = TARGET_SIZE - out_w
        pad = ((pad_h // 2, pad_h - pad_h // 2), (pad_w // 2, pad_w - pad_w // 2))
    if (out_h, out_w) == (in_h, in_w) and pad == ((0, 0), (0, 0)):
        return sample

    def for_image(arr):
        return np.pad(_resize(arr, out_h, out_w, order=1), pad)

    def for_mask(arr):
        return np.pad(_resize(arr, out_h, out_w, order=0), pad)

    return _map_rasters(sample, for_image, for_mask)


def flip(sample: Sample, axis: str) -> Sample:
    """Mirror about the vertical ('horizontal' flip) or horizontal
    ('vertical' flip) centerline."""
    if axis == "horizontal":
        fn = lambda arr: np.ascontiguousarray(arr[:, ::-1])
    elif axis == "vertical":
        fn = lambda arr: np.ascontiguousarray(arr[::-1, :])
    else:
        raise ValueError(f"axis must be 'horizontal' or 'vertical', got {axis!r}")
    return _map_rasters(sample, fn, fn)


def rotate(sample: Sample, angle: float) -> Sample:
    """Rotate content about the image center.

    Positive angles turn content counterclockwise on screen (row 0 at
    top). Bilinear for the image, nearest for masks; revealed corners
    become 0/background. angle=0 reproduces the input exactly (integer
    sample positions interpolate exactly).
    """
    height, width = sample.image.shape
    cy = (height - 1) / 2.0
    cx = (width - 1) / 2.0
    rad = math.radians(angle)
    cos_a = math.cos(rad)
    sin_a = math.sin(rad)
    dr = np.arange(height, dtype=np.float64)[:, None] - cy
    dc = np.arange(width, dtype=np.float64)[None, :] - cx
    src_rows = dc * sin_a + dr * cos_a + cy
    src_cols = dc * cos_a - dr * sin_a + cx

    return _map_rasters(
        sample,
        lambda arr: _warp(arr, src_rows, src_cols, order=1),
        lambda arr: _warp(arr, src_rows, src_cols, order=0),
    )


def translate(sample: Sample, shift_x: float, shift_y: float) -> Sample:
    """Shift content by round(shift * dim) whole pixels.

    Positive shift_x moves content right, positive shift_y down; the
    vacated band is 0/background. Rounding is half away from zero.
    """
    height, width = sample.image.shape
    dx = _round_half_away(shift_x * width)
    dy = _round_half_away(shift_y * height)

    def shifted(arr):
        out = np.zeros_like(arr)
        src_r = slice(max(0, -dy), min(height, height - dy))
        dst_r = slice(max(0, dy), min(height, height + dy))
        src_c = slice(max(0, -dx), min(width, width - dx))
        dst_c = slice(max(0, dx), min(width, width + dx))
        if src_r.start < src_r.stop and src_c.start < src_c.stop:
            out[dst_r, dst_c] = arr[src_r, src_c]
        return out

    return _map_rasters(sample, shifted, shifted)


def zoom(sample: Sample, scale_delta: float) -> Sample:
    """Scale content about the image center by (1 + scale_delta).

    Shrinking reveals a zero-fill border; growing crops. scale_delta=0
    reproduces the input exactly.
    """
    factor = 1.0 + scale_delta
    if factor <= 0:
        raise ValueError("scale_delta must keep the scale factor positive")
    height, width = sample.image.shape
    cy = (height - 1) / 2.0
    cx = (width - 1) / 2.0
    rows = (np.arange(height, dtype=np.float64) - cy) / factor + cy
    cols = (np.arange(width, dtype=np.float64) - cx) / factor + cx
    src_rows = np.broadcast_to(rows[:, None], (height, width))
    src_cols = np.broadcast_to(cols[None, :], (height, width))

    return _map_rasters(
        sample,
        lambda arr: _warp(arr, src_rows, src_cols, order=1),
        lambda arr: _warp(arr, src_rows, src_cols, order=0),
    )


def random_crop(sample: Sample, rng) -> Sample:
    """Cut a random 224x224 window out of a 256x256 sample.

    The origin is uniform over {0..32}^2 (row drawn first, then column)
    and shared by image and masks.
    """
    height, width = sample.image.shape
    if (height, width) != (CROP_SOURCE_SIZE, CROP_SOURCE_SIZE):
        raise ShapeMismatch(
            f"random_crop needs a {CROP_SOURCE_SIZE}x{CROP_SOURCE_SIZE} input, "
            f"got {height}x{width}"
        )
    span = CROP_SOURCE_SIZE - TARGET_SIZE + 1
    row = rng.integers(span)
    col = rng.integers(span)
    window = lambda arr: arr[row:row + TARGET_SIZE, col:col + TARGET_SIZE].copy()
    return _map_rasters(sample, window, window)


def brightness(sample: Sample, offset: float) -> Sample:
    """Additive intensity offset, clamped to [0, 1]."""
    out = np.clip(sample.image.data + offset, 0.0, 1.0)
    return sample.with_rasters(image=ImageBuffer(out))


def contrast(sample: Sample, gain_delta: float) -> Sample:
    """Scale contrast about the 0.5 pivot: out = 0.5 + (1+gain_delta)(in-0.5)."""
    if gain_delta == 0.0:
        # the pivot arithmetic is not bit-exact for intensities near zero,
        # so the identity setting short-circuits
        return sample
    out = np.clip(0.5 + (1.0 + gain_delta) * (sample.image.data - 0.5), 0.0, 1.0)
    return sample.with_rasters(image=ImageBuffer(out))


def gamma(sample: Sample, exponent: float) -> Sample:
    """Power-law intensity mapping out = in^exponent; endpoints fixed."""
    if exponent <= 0:
        raise ValueError("gamma exponent must be > 0")
    out = np.power(sample.image.data, exponent)
    return sample.with_rasters(image=ImageBuffer(out))


def gaussian_noise(sample: Sample, rng, sigma: float = NOISE_SIGMA) -> Sample:
    """Add i.i.d. zero-mean Gaussian noise, clamped to [0, 1].

    Draw cost: one normal per raster pixel (row-major block).
    """
    height, width = sample.image.shape
    noise = rng.normal_block(height * width).reshape(height, width)
    out = np.clip(sample.image.data + sigma * noise, 0.0, 1.0)
    return sample.with_rasters(image=ImageBuffer(out))
