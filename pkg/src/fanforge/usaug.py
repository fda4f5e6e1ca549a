"""Ultrasound-specific augmentations.

Four transforms that imitate physical artifacts of fan-beam B-mode
imaging, all expressed in the probe-centric coordinate system of
:mod:`fanforge.core` (apex at normalized (0.5, 0)):

- ``depth_attenuation``: progressive darkening with radial distance from
  the probe, as deeper echoes return weaker.
- ``haze_artifact``: a bright noisy band at a fixed radius, as caused by
  reverberation between parallel tissue layers.
- ``gaussian_shadow``: an elliptical dark patch, as cast behind bone or
  air pockets that block wave propagation.
- ``speckle_reduction``: edge-preserving bilateral smoothing of the
  granular interference texture.

The attenuation and shadow transforms apply the scan mask
multiplicatively, so pixels outside the fan are zeroed by default
(``preserve_background=True`` keeps them instead). The haze transform
only ever adds intensity inside the fan. Every op is a pure function:
masks, label, and seed pass through untouched, and identical inputs give
bit-identical outputs.

Map builders (``attenuation_map``, ``haze_envelope``, ``shadow_map``)
are exposed separately so the per-pixel math can be checked against
scalar oracles without running a full transform.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ImageBuffer, Sample, radial_distance_grid, normalized_grid
from .errors import MissingScanMask
from .kernels import bilateral_filter

#: Default sampling ranges (uniform low/high) for policy-driven draws.
DEPTH_RATE_RANGE = (0.0, 3.0)
DEPTH_MAX_ATTENUATION_RANGE = (0.0, 0.0)
HAZE_RADIUS_RANGE = (0.05, 0.95)
HAZE_SIGMA_RANGE = (0.0, 0.1)
SHADOW_STRENGTH_RANGE = (0.25, 0.8)
SHADOW_CENTER_RANGE = (0.0, 1.0)
SHADOW_WIDTH_RANGE = (0.01, 0.2)
BILATERAL_SIGMA_SPATIAL_RANGE = (0.05, 1.0)
BILATERAL_SIGMA_COLOR_RANGE = (0.05, 1.0)
BILATERAL_WINDOW = 5


@dataclass(frozen=True)
class DepthAttenuationParams:
    """Radial intensity falloff.

    ``attenuation_rate`` controls how fast intensity decays with radial
    distance; ``max_attenuation`` is the floor the decay levels off at
    (0 = full decay to black possible).
    """

    attenuation_rate: float
    max_attenuation: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.max_attenuation <= 1.0:
            raise ValueError("max_attenuation must lie in [0, 1]")
        if self.attenuation_rate < 0.0:
            raise ValueError("attenuation_rate must be >= 0")


@dataclass(frozen=True)
class HazeParams:
    """Noisy bright band centered at radial distance ``radius`` with
    Gaussian falloff ``sigma`` (both in normalized distance units)."""

    radius: float
    sigma: float

    def __post_init__(self):
        if not 0.0 < self.radius < 1.0:
            raise ValueError("radius must lie in (0, 1)")
        if self.sigma < 0.0:
            raise ValueError("sigma must be >= 0")


@dataclass(frozen=True)
class ShadowParams:
    """Elliptical Gaussian dimming.

    ``strength`` is the peak intensity loss (1 = black at the center);
    the center is a normalized point and the widths are fractions of the
    image extent.
    """

    strength: float
    center_x: float
    center_y: float
    sigma_x: float
    sigma_y: float

    def __post_init__(self):
        if not 0.0 <= self.strength <= 1.0:
            raise ValueError("strength must lie in [0, 1]")
        if self.sigma_x <= 0.0 or self.sigma_y <= 0.0:
            raise ValueError("shadow widths must be > 0")


@dataclass(frozen=True)
class BilateralParams:
    """Bilateral filter settings: spatial sigma in pixels, color sigma in
    normalized intensity units, odd window size."""

    sigma_spatial: float
    sigma_color: float
    window_size: int = BILATERAL_WINDOW

    def __post_init__(self):
        if self.sigma_spatial <= 0.0 or self.sigma_color <= 0.0:
            raise ValueError("sigmas must be > 0")
        if self.window_size < 3 or self.window_size % 2 == 0:
            raise ValueError("window_size must be odd and >= 3")


def _require_mask(sample: Sample) -> np.ndarray:
    if sample.scan_mask is None:
        raise MissingScanMask(f"sample {sample.id!r} has no scan mask")
    return sample.scan_mask.data


def attenuation_map(height: int, width: int, params: DepthAttenuationParams) -> np.ndarray:
    """Per-pixel attenuation multiplier.

    A = (1 - max_attenuation) * exp(-attenuation_rate * d) + max_attenuation
    where d is the radial distance from the probe apex. A is 1 at the
    apex and decays toward ``max_attenuation`` with depth.
    """
    d = radial_distance_grid(height, width)
    lam = params.max_attenuation
    return (1.0 - lam) * np.exp(-params.attenuation_rate * d) + lam


def haze_envelope(height: int, width: int, params: HazeParams) -> np.ndarray:
    """Radial Gaussian band profile exp(-(d - radius)^2 / 2 sigma^2).

    With sigma = 0 the band degenerates to the exact radius shell:
    1 where d equals radius, 0 elsewhere.
    """
    d = radial_distance_grid(height, width)
    if params.sigma == 0.0:
        return (d == params.radius).astype(np.float64)
    dev = d - params.radius
    return np.exp(-(dev * dev) / (2.0 * params.sigma * params.sigma))


def shadow_map(height: int, width: int, params: ShadowParams) -> np.ndarray:
    """Per-pixel shadow multiplier.

    G = 1 - strength * exp(-(x-cx)^2/2sx^2 - (y-cy)^2/2sy^2), ranging
    over [1 - strength, 1]; 1 means no dimming.
    """
    x, y = normalized_grid(height, width)
    ex = (x - params.center_x) ** 2 / (2.0 * params.sigma_x ** 2)
    ey = (y - params.center_y) ** 2 / (2.0 * params.sigma_y ** 2)
    return 1.0 - params.strength * np.exp(-(ex + ey))


def depth_attenuation(sample: Sample, params: DepthAttenuationParams,
                      preserve_background: bool = False) -> Sample:
    """Darken the image progressively with distance from the probe.

    Output is attenuation_map * scan_mask * image: outside the fan the
    multiplicative mask zeroes pixels unless ``preserve_background``.
    """
    mask = _require_mask(sample)
    img = sample.image.data
    amap = attenuation_map(img.shape[0], img.shape[1], params)
    background = img if preserve_background else 0.0
    out = np.where(mask == 1, amap * img, background)
    return sample.with_rasters(image=ImageBuffer(out))


def haze_artifact(sample: Sample, params: HazeParams, rng) -> Sample:
    """Add a noisy bright band at a fixed radial distance.

    The band profile is scaled by u/2 with an independent u ~ U(0,1) per
    pixel, so the artifact reads as static rather than a smooth ring.
    The addition happens inside the scan mask only and is clamped at 1;
    the op never darkens. Draw cost: one uniform per raster pixel
    (full height x width block, row-major), regardless of mask coverage.
    """
    mask = _require_mask(sample)
    img = sample.image.data
    height, width = img.shape
    env = haze_envelope(height, width, params)
    u = rng.random_block(height * width).reshape(height, width)
    addend = 0.5 * u * env
    out = np.where(mask == 1, np.minimum(img + addend, 1.0), img)
    return sample.with_rasters(image=ImageBuffer(out))


def gaussian_shadow(sample: Sample, params: ShadowParams,
                    preserve_background: bool = False) -> Sample:
    """Dim an elliptical region, imitating an acoustic shadow.

    Output is shadow_map * scan_mask * image; pointwise never brighter
    than the masked input.
    """
    mask = _require_mask(sample)
    img = sample.image.data
    gmap = shadow_map(img.shape[0], img.shape[1], params)
    background = img if preserve_background else 0.0
    out = np.where(mask == 1, gmap * img, background)
    return sample.with_rasters(image=ImageBuffer(out))


def speckle_reduction(sample: Sample, params: BilateralParams) -> Sample:
    """Smooth speckle texture with an edge-preserving bilateral filter.

    Each output pixel is a convex combination of its window, so no new
    intensity extrema appear. Runs on the active kernel backend. No scan
    mask required; filtering acts on the full frame.
    """
    out = bilateral_filter(sample.image.data, params.sigma_spatial,
                           params.sigma_color, params.window_size)
    # Convex combination keeps values inside the window hull; the clip
    # only absorbs last-ulp rounding above 1.0 or below 0.0.
    np.clip(out, 0.0, 1.0, out=out)
    return sample.with_rasters(image=ImageBuffer(out))
