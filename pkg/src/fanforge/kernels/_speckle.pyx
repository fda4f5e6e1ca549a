# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled bilateral speckle kernel.

Numerically mirrors kernels.pure.bilateral_filter: identical reflect
padding and identical per-pixel accumulation order (dy outer, dx inner),
so the two backends differ only by last-ulp exp() rounding. The loop nest
runs without the GIL.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp

cnp.import_array()


def bilateral_filter(image, double sigma_spatial, double sigma_color,
                     int window_size=5):
    """See kernels.pure.bilateral_filter; same contract, compiled loops."""
    if sigma_spatial <= 0 or sigma_color <= 0:
        raise ValueError("sigmas must be positive")
    if window_size < 3 or window_size % 2 == 0:
        raise ValueError("window_size must be odd and >= 3")
    img = np.ascontiguousarray(image, dtype=np.float64)
    cdef int pad = window_size // 2
    padded_arr = np.pad(img, pad, mode="reflect")
    out_arr = np.empty_like(img)

    cdef double[:, ::1] padded = padded_arr
    cdef double[:, ::1] out = out_arr
    cdef int height = img.shape[0]
    cdef int width = img.shape[1]
    cdef double inv2ss = 1.0 / (2.0 * sigma_spatial * sigma_spatial)
    cdef double inv2sc = 1.0 / (2.0 * sigma_color * sigma_color)

    # Spatial weights are a function of the offset only; precompute once.
    spatial_arr = np.empty((window_size, window_size), dtype=np.float64)
    cdef double[:, ::1] spatial = spatial_arr
    cdef int dy, dx
    for dy in range(-pad, pad + 1):
        for dx in range(-pad, pad + 1):
            spatial[dy + pad, dx + pad] = exp(-(dy * dy + dx * dx) * inv2ss)

    cdef int r, c
    cdef double center, neighbor, diff, w, num, den
    with nogil:
        for r in range(height):
            for c in range(width):
                center = padded[r + pad, c + pad]
                num = 0.0
                den = 0.0
                for dy in range(window_size):
                    for dx in range(window_size):
                        neighbor = padded[r + dy, c + dx]
                        diff = neighbor - center
                        w = spatial[dy, dx] * exp(-(diff * diff) * inv2sc)
                        num += w * neighbor
                        den += w
                out[r, c] = num / den
    return out_arr
