"""Training-pipeline bindings for the fanforge augmentation engine.

``make_transform`` compiles a policy JSON string (the same object a run
config carries under its ``policy`` key) into an immutable handle;
``apply`` runs that policy on raw arrays with an explicit per-call seed.
The numbers agree with the batch engine: calling ``apply`` with
``derive_sample_seed(global_seed, flat_index)`` reproduces what the
``augment`` CLI writes for that sample, bit for bit.

A handle holds a validated, frozen policy and nothing else, so one
handle is safe to share across dataloader workers: every ``apply`` call
derives its own RNG streams from the seed argument and touches no
shared state. The bilateral kernel releases the interpreter lock while
it runs, so threaded loaders overlap on the slow op too.
"""

from __future__ import annotations

import json
import operator

import numpy as np

from fanforge.core import ImageBuffer, LabelMask, Sample, ScanMask
from fanforge.errors import SchemaError
from fanforge.policy import PolicySpec, apply_policy, policy_spec_from_dict
from fanforge.rng import MASK64

__all__ = ["TransformHandle", "make_transform", "apply"]


class TransformHandle:
    """Opaque immutable reference to a compiled policy."""

    __slots__ = ("_policy",)

    def __init__(self, policy: PolicySpec):
        if not isinstance(policy, PolicySpec):
            raise TypeError("TransformHandle wraps a PolicySpec")
        object.__setattr__(self, "_policy", policy)

    def __setattr__(self, name, value):
        raise AttributeError("TransformHandle is immutable")

    def __delattr__(self, name):
        raise AttributeError("TransformHandle is immutable")

    @property
    def mode(self) -> str:
        return self._policy.mode

    @property
    def op_names(self) -> tuple:
        return tuple(spec.name for spec in self._policy.op_set)

    def __repr__(self) -> str:
        return f"TransformHandle(mode={self.mode!r}, ops={list(self.op_names)})"


def make_transform(config_json: str) -> TransformHandle:
    """Validate policy JSON into a reusable, thread-shareable handle.

    The schema matches a run config's ``policy`` object; schema
    violations raise SchemaError naming the offending key
    (``op_set[2].name`` style paths).
    """
    try:
        obj = json.loads(config_json)
    except json.JSONDecodeError as exc:
        raise SchemaError("policy", f"not valid JSON ({exc.msg})") from None
    return TransformHandle(policy_spec_from_dict(obj))


def apply(handle: TransformHandle, image, scan_mask=None, label_mask=None,
          seed: int = 0):
    """Run the handle's policy once and return ``(image', scan', label')``.

    The image is H x W float64 in [0, 1]; the scan mask {0, 1}; the
    label mask integer class ids. Wrong-dtype or non-contiguous inputs
    are copied on the way in (a C-contiguous read-only float64 image
    crosses zero-copy). Inputs are never written to; outputs are fresh
    writeable arrays, with None standing in for masks that were not
    provided. Ops that need a scan mask raise MissingScanMask when none
    was given; mask shapes that disagree with the image raise
    ShapeMismatch.
    """
    if not isinstance(handle, TransformHandle):
        raise TypeError("handle must come from make_transform")
    seed = operator.index(seed)
    if not 0 <= seed <= MASK64:
        raise ValueError("seed must fit in 64 bits")

    sample = Sample(
        id="binding",
        image=ImageBuffer(np.asarray(image, dtype=np.float64)),
        scan_mask=None if scan_mask is None else ScanMask(np.asarray(scan_mask)),
        label_mask=None if label_mask is None else _label_mask(label_mask),
        seed=seed,
    )
    out = apply_policy(sample, handle._policy)
    return (
        np.array(out.image.data),
        None if out.scan_mask is None else np.array(out.scan_mask.data),
        None if out.label_mask is None else np.array(out.label_mask.data),
    )


def _label_mask(arr) -> LabelMask:
    data = np.asarray(arr)
    classes = int(data.max()) + 1 if data.size else 1
    return LabelMask(data, num_classes=max(classes, 1))
