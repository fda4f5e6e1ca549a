"""Pure numpy implementation of the bilateral speckle kernel.

Used as the reference backend and as the fallback when the compiled
extension is unavailable. The compiled backend mirrors this accumulation
order exactly (per output pixel: window offsets row-major, dy outer, dx
inner) so both agree to floating-point rounding of ``exp``.
"""

from __future__ import annotations

import math

import numpy as np


def bilateral_filter(image: np.ndarray, sigma_spatial: float,
                     sigma_color: float, window_size: int = 5) -> np.ndarray:
    """Edge-preserving smoothing: normalized weighted mean over a window.

    Weight of neighbor q for center p is
    exp(-|q-p|^2 / 2 sigma_spatial^2) * exp(-(I[q]-I[p])^2 / 2 sigma_color^2)
    with spatial distance in pixels and intensity in normalized units.
    Borders are handled by reflect padding.
    """
    if sigma_spatial <= 0 or sigma_color <= 0:
        raise ValueError("sigmas must be positive")
    if window_size < 3 or window_size % 2 == 0:
        raise ValueError("window_size must be odd and >= 3")
    img = np.asarray(image, dtype=np.float64)
    pad = window_size // 2
    padded = np.pad(img, pad, mode="reflect")
    height, width = img.shape
    num = np.zeros_like(img)
    den = np.zeros_like(img)
    inv2ss = 1.0 / (2.0 * sigma_spatial * sigma_spatial)
    inv2sc = 1.0 / (2.0 * sigma_color * sigma_color)
    for dy in range(-pad, pad + 1):
        for dx in range(-pad, pad + 1):
            shifted = padded[pad + dy:pad + dy + height, pad + dx:pad + dx + width]
            w_spatial = math.exp(-(dx * dx + dy * dy) * inv2ss)
            diff = shifted - img
            w = w_spatial * np.exp(-(diff * diff) * inv2sc)
            num += w * shifted
            den += w
    return num / den
