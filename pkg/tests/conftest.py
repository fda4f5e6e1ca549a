"""Shared fixtures: deterministic synthetic samples with fan geometry."""

import numpy as np
import pytest

from fanforge.core import ImageBuffer, LabelMask, Sample, ScanMask
from fanforge.synthetic import fan_sector_mask, make_fan_sample


@pytest.fixture
def fan_sample():
    """224x224 synthetic sector scan with mask, labels, and class label."""
    return make_fan_sample("fixture-fan", height=224, width=224, seed=4242)


@pytest.fixture
def small_sample():
    """Fast 32x32 sample with a full-frame mask for formula-level tests."""
    rng = np.random.default_rng(77)
    image = ImageBuffer(rng.random((32, 32)))
    mask = ScanMask(np.ones((32, 32), dtype=np.uint8))
    labels = LabelMask((rng.random((32, 32)) > 0.8).astype(np.int32), num_classes=2)
    return Sample(id="small", image=image, scan_mask=mask, label_mask=labels,
                  label=1, seed=99)


@pytest.fixture
def sector_mask_64():
    """Analytic 64x64 fan sector used by mask-recovery tests."""
    return fan_sector_mask(64, 64, opening_deg=70.0)
