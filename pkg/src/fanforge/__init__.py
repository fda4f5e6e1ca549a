"""fanforge: deterministic augmentation engine for fan-beam B-mode ultrasound.

Library layout:

- :mod:`fanforge.core` raster types, probe-centric coordinates, seeds
- :mod:`fanforge.rng` the documented splitmix64 generator
- :mod:`fanforge.usaug` ultrasound-specific transforms
- :mod:`fanforge.stdaug` standard transforms and preprocessing
- :mod:`fanforge.scanmask` scan-region extraction
- :mod:`fanforge.policy` composition modes and effect ranking
- :mod:`fanforge.pipeline` manifests, batch engine, bench, previews
- :mod:`fanforge.kernels` compiled/pure speckle kernel backends
"""

__version__ = "0.1.0"

from .core import (
    ImageBuffer,
    LabelMask,
    NormalizedPoint,
    Sample,
    ScanMask,
    derive_sample_seed,
    normalize_u8,
    quantize_u8,
    radial_distance,
)
from .policy import (
    AugStats,
    PolicySpec,
    TransformSpec,
    apply_per_op,
    apply_policy,
    classify_effect,
    op_names,
    relative_improvement,
    top_n_set,
    trivial_augment,
)
from .rng import SplitMix64

__all__ = [
    "__version__",
    "ImageBuffer",
    "ScanMask",
    "LabelMask",
    "Sample",
    "NormalizedPoint",
    "radial_distance",
    "derive_sample_seed",
    "normalize_u8",
    "quantize_u8",
    "SplitMix64",
    "TransformSpec",
    "PolicySpec",
    "AugStats",
    "apply_per_op",
    "trivial_augment",
    "apply_policy",
    "relative_improvement",
    "classify_effect",
    "top_n_set",
    "op_names",
]
