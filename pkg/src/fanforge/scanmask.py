"""Approximate scan-region extraction from B-mode frames.

Real probes leave a near-black background around the fan-shaped signal
region. A usable binary mask of that region comes from plain morphology:
threshold away the background, close small gaps (annotation ticks,
dropout), keep the dominant connected blob, and fill interior holes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage as ndi

from .core import ImageBuffer, ScanMask
from .errors import EmptyMask

#: 4-connectivity for component labeling.
_CROSS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


@dataclass(frozen=True)
class MaskGenParams:
    """Extraction settings.

    intensity_threshold rejects compression noise (default 4/255);
    closing_radius is the disk radius in pixels for gap closing.
    """

    intensity_threshold: float = 4.0 / 255.0
    closing_radius: int = 5
    fill_holes: bool = True
    keep_largest_component: bool = True

    def __post_init__(self):
        if not 0.0 < self.intensity_threshold < 1.0:
            raise ValueError("intensity_threshold must lie in (0, 1)")
        if self.closing_radius < 1:
            raise ValueError("closing_radius must be >= 1")


def _disk(radius: int) -> np.ndarray:
    span = np.arange(-radius, radius + 1)
    yy, xx = np.meshgrid(span, span, indexing="ij")
    return (yy * yy + xx * xx) <= radius * radius


def generate_scan_mask(image: ImageBuffer,
                       params: MaskGenParams = MaskGenParams()) -> ScanMask:
    """Extract the binary scan-region mask of a frame.

    Pipeline: intensity > threshold, binary closing with a disk
    structuring element, largest 4-connected component, interior hole
    fill. Raises EmptyMask when nothing exceeds the threshold.

    The closing is composed from dilation (background border) and
    erosion (foreground border) so that a fan touching the frame edge is
    not eaten away at that edge.
    """
    binary = image.data > params.intensity_threshold
    if not binary.any():
        raise EmptyMask(f"no pixel above threshold {params.intensity_threshold}")

    disk = _disk(params.closing_radius)
    closed = ndi.binary_dilation(binary, structure=disk, border_value=0)
    closed = ndi.binary_erosion(closed, structure=disk, border_value=1)

    if params.keep_largest_component:
        labels, count = ndi.label(closed, structure=_CROSS)
        if count > 1:
            sizes = np.bincount(labels.ravel())
            sizes[0] = 0
            closed = labels == sizes.argmax()

    if params.fill_holes:
        closed = ndi.binary_fill_holes(closed, structure=_CROSS)

    return ScanMask(closed.astype(np.uint8))
