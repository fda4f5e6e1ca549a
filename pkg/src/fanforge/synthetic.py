"""Synthetic fan-beam frames.

Self-contained deterministic samples for benchmarks, previews, and
tests: a circular-sector scan region with a depth gradient and speckled
texture, plus a two-structure label mask. Everything is a pure function
of (dimensions, seed).
"""

from __future__ import annotations

import json
import os

import numpy as np

from .core import ImageBuffer, LabelMask, Sample, ScanMask, normalized_grid
from .rng import SplitMix64, derive_sample_seed
from . import pngio

FAN_OPENING_DEG = 70.0
FAN_RADIUS_MIN = 0.06
FAN_RADIUS_MAX = 0.95


def fan_sector_mask(height: int, width: int,
                    opening_deg: float = FAN_OPENING_DEG,
                    radius_min: float = FAN_RADIUS_MIN,
                    radius_max: float = FAN_RADIUS_MAX) -> np.ndarray:
    """Binary sector with apex at normalized (0.5, 0), opening downward."""
    x, y = normalized_grid(height, width)
    dx = x - 0.5
    dist = np.sqrt(dx * dx + y * y)
    angle = np.degrees(np.arctan2(np.abs(dx), y))
    inside = (dist >= radius_min) & (dist <= radius_max) & (angle <= opening_deg / 2.0)
    return inside.astype(np.uint8)


def make_fan_sample(sample_id: str = "synthetic", height: int = 224,
                    width: int = 224, seed: int = 0) -> Sample:
    """One deterministic fan-beam sample with scan and label masks."""
    mask = fan_sector_mask(height, width)
    x, y = normalized_grid(height, width)
    dx = x - 0.5
    dist = np.sqrt(dx * dx + y * y)

    rng = SplitMix64(derive_sample_seed(seed, 0))
    speckle = rng.random_block(height * width).reshape(height, width)
    texture = 0.25 + 0.45 * np.exp(-1.2 * dist) + 0.3 * (speckle - 0.5)
    image = np.clip(texture, 0.02, 0.98) * mask

    blob_a = ((x - 0.5) ** 2 + (y - 0.45) ** 2) <= 0.12 ** 2
    blob_b = ((x - 0.38) ** 2 + (y - 0.62) ** 2) <= 0.06 ** 2
    labels = np.zeros((height, width), dtype=np.int32)
    labels[blob_a & (mask == 1)] = 1
    labels[blob_b & (mask == 1)] = 2

    return Sample(
        id=sample_id,
        image=ImageBuffer(image),
        scan_mask=ScanMask(mask),
        label_mask=LabelMask(labels, num_classes=3),
        label=1,
        seed=seed,
    )


def write_synthetic_dataset(directory, count: int, height: int = 224,
                            width: int = 224, seed: int = 0,
                            with_scan_masks: bool = True,
                            with_label_masks: bool = True) -> str:
    """Write ``count`` synthetic samples plus a JSONL manifest.

    Returns the manifest path. Sample i uses seed
    derive_sample_seed(seed, i), so datasets are reproducible and
    extending one never changes existing files.
    """
    os.makedirs(directory, exist_ok=True)
    manifest_path = os.path.join(directory, "manifest.jsonl")
    with open(manifest_path, "w") as fh:
        for i in range(count):
            sample = make_fan_sample(f"syn{i:04d}", height, width,
                                     seed=derive_sample_seed(seed, i))
            entry = {"id": sample.id, "image_path": f"{sample.id}.png"}
            pngio.save_image(os.path.join(directory, f"{sample.id}.png"), sample.image)
            if with_scan_masks:
                entry["scan_mask_path"] = f"{sample.id}__scan.png"
                pngio.save_scan_mask(os.path.join(directory, entry["scan_mask_path"]),
                                     sample.scan_mask)
            if with_label_masks:
                entry["label_mask_path"] = f"{sample.id}__label.png"
                pngio.save_label_mask(os.path.join(directory, entry["label_mask_path"]),
                                      sample.label_mask)
                entry["label"] = sample.label
            fh.write(json.dumps(entry) + "\n")
    return manifest_path
