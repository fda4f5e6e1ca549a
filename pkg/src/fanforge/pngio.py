"""8-bit grayscale PNG I/O at the [0,1] boundary.

Images convert exactly by /255 on read and round-to-nearest on write.
Color inputs collapse to one channel via BT.601 luminance computed in
float (no intermediate 8-bit rounding). Scan masks are stored 0/255 for
viewability and binarized (>127) on read; label masks carry raw class
ids.
"""

from __future__ import annotations

import numpy as np
from PIL import Image

from .core import ImageBuffer, LabelMask, ScanMask, luminance, normalize_u8, quantize_u8
from .errors import IoError


def load_image(path) -> ImageBuffer:
    with Image.open(path) as img:
        if img.mode == "L":
            return normalize_u8(np.asarray(img))
        if img.mode in ("I", "I;16", "I;16B", "I;16L", "F"):
            raise ValueError(f"{path}: >8-bit pixel formats are not supported")
        rgb = np.asarray(img.convert("RGB"), dtype=np.float64)
    return ImageBuffer(luminance(rgb) / 255.0)


def load_scan_mask(path) -> ScanMask:
    with Image.open(path) as img:
        arr = np.asarray(img.convert("L"))
    return ScanMask((arr > 127).astype(np.uint8))


def load_label_mask(path, num_classes=None) -> LabelMask:
    with Image.open(path) as img:
        arr = np.asarray(img.convert("L")).astype(np.int32)
    if num_classes is None:
        num_classes = int(arr.max()) + 1
    return LabelMask(arr, num_classes)


def save_image(path, image: ImageBuffer) -> None:
    try:
        Image.fromarray(quantize_u8(image), mode="L").save(path, format="PNG")
    except OSError as exc:
        raise IoError(f"failed to write {path}: {exc}") from exc


def save_scan_mask(path, mask: ScanMask) -> None:
    try:
        Image.fromarray(mask.data * np.uint8(255), mode="L").save(path, format="PNG")
    except OSError as exc:
        raise IoError(f"failed to write {path}: {exc}") from exc


def save_label_mask(path, mask: LabelMask) -> None:
    if mask.num_classes > 256:
        raise IoError(f"{path}: png8 label masks support at most 256 classes")
    try:
        Image.fromarray(mask.data.astype(np.uint8), mode="L").save(path, format="PNG")
    except OSError as exc:
        raise IoError(f"failed to write {path}: {exc}") from exc
