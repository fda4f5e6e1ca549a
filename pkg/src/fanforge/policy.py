"""Augmentation composition and effect ranking.

Composition has two modes. ``per_op_probability`` walks an ordered op
set and applies each op independently with probability p (default 0.5).
``trivial_augment`` draws two slots i.i.d., each uniform over the op set
plus one implicit identity option (K+1 choices), and applies the drawn
ops sequentially at freshly sampled strengths with no extra gate;
``identity_in_set=True`` switches to uniform over the op set alone for
parity with the classic formulation (supply an explicit ``identity``
entry in that case).

Draw discipline, shared by every op adapter: first one uniform per
declared parameter, in the registry's declared order, even when a range
is degenerate (lo == hi) so stream layouts never depend on overrides;
then any op-internal draws (haze u field, noise normals, crop origin).

``apply_policy`` derives one sub-stream per policy stage from the sample
seed: stage 0 feeds selection draws (gates or slot indices), stage k >= 1
feeds the strengths of the op at position/slot k. Replaying any stage
never depends on how many values another stage consumed.

Ranking: AugStats summarizes per-augmentation metric runs;
``relative_improvement`` (delta percent), ``classify_effect``
(effective / ineffective / harmful vs the baseline SEM band), and
``top_n_set`` (highest mean first, ties lexicographic by name) implement
the selection protocol. ``load_metric_log`` / ``rank_from_log`` handle
the CSV interface: input columns ``augmentation,run_id,metric`` with the
baseline rows named ``none``; output columns
``augmentation,mean,sem,delta_pct,category,rank``.
"""

from __future__ import annotations

import csv
import math
import statistics
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

from . import stdaug, usaug
from .core import Sample
from .errors import (
    NOutOfRange,
    SchemaError,
    UnknownTransform,
    ZeroBaseline,
)
from .rng import SplitMix64, derive_sample_seed

EFFECTIVE = "effective"
INEFFECTIVE = "ineffective"
HARMFUL = "harmful"

PER_OP_MODE = "per_op_probability"
TRIVIAL_MODE = "trivial_augment"

IDENTITY_NAME = "identity"


@dataclass(frozen=True)
class _OpEntry:
    name: str
    # param -> ((default_lo, default_hi), (hard_lo, hard_hi)); order is draw order
    params: Tuple[Tuple[str, Tuple[Tuple[float, float], Tuple[float, float]]], ...]
    needs_mask: bool
    apply: Callable[[Sample, Dict[str, Tuple[float, float]], SplitMix64], Sample]

    def param_space(self) -> Dict[str, Tuple[Tuple[float, float], Tuple[float, float]]]:
        return dict(self.params)


def _draw(ranges, rng, name):
    lo, hi = ranges[name]
    return rng.uniform(lo, hi)


def _apply_depth_attenuation(sample, ranges, rng):
    rate = _draw(ranges, rng, "attenuation_rate")
    lam = _draw(ranges, rng, "max_attenuation")
    params = usaug.DepthAttenuationParams(attenuation_rate=rate, max_attenuation=lam)
    return usaug.depth_attenuation(sample, params)


def _apply_haze(sample, ranges, rng):
    radius = _draw(ranges, rng, "radius")
    sigma = _draw(ranges, rng, "sigma")
    return usaug.haze_artifact(sample, usaug.HazeParams(radius=radius, sigma=sigma), rng)


def _apply_shadow(sample, ranges, rng):
    strength = _draw(ranges, rng, "strength")
    center_x = _draw(ranges, rng, "center_x")
    center_y = _draw(ranges, rng, "center_y")
    sigma_x = _draw(ranges, rng, "sigma_x")
    sigma_y = _draw(ranges, rng, "sigma_y")
    params = usaug.ShadowParams(strength=strength, center_x=center_x,
                                center_y=center_y, sigma_x=sigma_x, sigma_y=sigma_y)
    return usaug.gaussian_shadow(sample, params)


def _apply_speckle(sample, ranges, rng):
    sigma_spatial = _draw(ranges, rng, "sigma_spatial")
    sigma_color = _draw(ranges, rng, "sigma_color")
    params = usaug.BilateralParams(sigma_spatial=sigma_spatial, sigma_color=sigma_color)
    return usaug.speckle_reduction(sample, params)


def _apply_flip_h(sample, ranges, rng):
    return stdaug.flip(sample, "horizontal")


def _apply_flip_v(sample, ranges, rng):
    return stdaug.flip(sample, "vertical")


def _apply_rotate(sample, ranges, rng):
    return stdaug.rotate(sample, _draw(ranges, rng, "angle"))


def _apply_translate(sample, ranges, rng):
    shift_x = _draw(ranges, rng, "shift_x")
    shift_y = _draw(ranges, rng, "shift_y")
    return stdaug.translate(sample, shift_x, shift_y)


def _apply_zoom(sample, ranges, rng):
    return stdaug.zoom(sample, _draw(ranges, rng, "scale_delta"))


def _apply_random_crop(sample, ranges, rng):
    return stdaug.random_crop(sample, rng)


def _apply_brightness(sample, ranges, rng):
    return stdaug.brightness(sample, _draw(ranges, rng, "offset"))


def _apply_contrast(sample, ranges, rng):
    return stdaug.contrast(sample, _draw(ranges, rng, "gain_delta"))


def _apply_gamma(sample, ranges, rng):
    return stdaug.gamma(sample, _draw(ranges, rng, "exponent"))


def _apply_gaussian_noise(sample, ranges, rng):
    sigma = _draw(ranges, rng, "sigma")
    return stdaug.gaussian_noise(sample, rng, sigma=sigma)


def _apply_identity(sample, ranges, rng):
    return sample


_FULL = (0.0, 1.0)

_REGISTRY: Dict[str, _OpEntry] = {
    entry.name: entry
    for entry in (
        _OpEntry(
            "depth_attenuation",
            (
                ("attenuation_rate", (usaug.DEPTH_RATE_RANGE, (0.0, 100.0))),
                ("max_attenuation", (usaug.DEPTH_MAX_ATTENUATION_RANGE, _FULL)),
            ),
            True,
            _apply_depth_attenuation,
        ),
        _OpEntry(
            "haze_artifact",
            (
                ("radius", (usaug.HAZE_RADIUS_RANGE, (1e-6, 1.0 - 1e-6))),
                ("sigma", (usaug.HAZE_SIGMA_RANGE, (0.0, 10.0))),
            ),
            True,
            _apply_haze,
        ),
        _OpEntry(
            "gaussian_shadow",
            (
                ("strength", (usaug.SHADOW_STRENGTH_RANGE, _FULL)),
                ("center_x", (usaug.SHADOW_CENTER_RANGE, _FULL)),
                ("center_y", (usaug.SHADOW_CENTER_RANGE, _FULL)),
                ("sigma_x", (usaug.SHADOW_WIDTH_RANGE, (1e-6, 10.0))),
                ("sigma_y", (usaug.SHADOW_WIDTH_RANGE, (1e-6, 10.0))),
            ),
            True,
            _apply_shadow,
        ),
        _OpEntry(
            "speckle_reduction",
            (
                ("sigma_spatial", (usaug.BILATERAL_SIGMA_SPATIAL_RANGE, (1e-6, 1e6))),
                ("sigma_color", (usaug.BILATERAL_SIGMA_COLOR_RANGE, (1e-6, 1e6))),
            ),
            False,
            _apply_speckle,
        ),
        _OpEntry("flip_horizontal", (), False, _apply_flip_h),
        _OpEntry("flip_vertical", (), False, _apply_flip_v),
        _OpEntry(
            "rotate",
            (("angle", (stdaug.ANGLE_RANGE, (-180.0, 180.0))),),
            False,
            _apply_rotate,
        ),
        _OpEntry(
            "translate",
            (
                ("shift_x", (stdaug.SHIFT_RANGE, (-1.0, 1.0))),
                ("shift_y", (stdaug.SHIFT_RANGE, (-1.0, 1.0))),
            ),
            False,
            _apply_translate,
        ),
        _OpEntry(
            "zoom",
            (("scale_delta", (stdaug.SCALE_RANGE, (-0.9, 10.0))),),
            False,
            _apply_zoom,
        ),
        _OpEntry("random_crop", (), False, _apply_random_crop),
        _OpEntry(
            "brightness",
            (("offset", (stdaug.BRIGHTNESS_RANGE, (-1.0, 1.0))),),
            False,
            _apply_brightness,
        ),
        _OpEntry(
            "contrast",
            (("gain_delta", (stdaug.CONTRAST_RANGE, (-1.0, 1.0))),),
            False,
            _apply_contrast,
        ),
        _OpEntry(
            "gamma",
            (("exponent", (stdaug.GAMMA_RANGE, (0.01, 10.0))),),
            False,
            _apply_gamma,
        ),
        _OpEntry(
            "gaussian_noise",
            (("sigma", ((stdaug.NOISE_SIGMA, stdaug.NOISE_SIGMA), _FULL)),),
            False,
            _apply_gaussian_noise,
        ),
        _OpEntry(IDENTITY_NAME, (), False, _apply_identity),
    )
}

#: The 14 rankable augmentations (identity excluded).
OP_NAMES: Tuple[str, ...] = (
    "depth_attenuation",
    "haze_artifact",
    "gaussian_shadow",
    "speckle_reduction",
    "flip_horizontal",
    "flip_vertical",
    "rotate",
    "translate",
    "zoom",
    "random_crop",
    "brightness",
    "contrast",
    "gamma",
    "gaussian_noise",
)


def op_names() -> Tuple[str, ...]:
    """Canonical names of the 14 rankable augmentations."""
    return OP_NAMES


def requires_scan_mask(name: str) -> bool:
    """Whether an op refuses to run on samples without a scan mask."""
    return _lookup(name).needs_mask


def _lookup(name: str) -> _OpEntry:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise UnknownTransform(f"unknown transform {name!r}") from None


@dataclass(frozen=True)
class TransformSpec:
    """One named augmentation with (optionally overridden) sampling ranges."""

    name: str
    ranges: Mapping[str, Tuple[float, float]] = field(default_factory=dict)
    enabled: bool = True

    def __post_init__(self):
        entry = _lookup(self.name)
        space = entry.param_space()
        normalized = {}
        for key, bounds in dict(self.ranges).items():
            if key not in space:
                raise ValueError(f"{self.name}: unknown parameter {key!r}")
            try:
                lo, hi = (float(bounds[0]), float(bounds[1]))
            except (TypeError, ValueError, IndexError):
                raise ValueError(f"{self.name}.{key}: range must be two numbers") from None
            hard_lo, hard_hi = space[key][1]
            if not (hard_lo <= lo <= hi <= hard_hi):
                raise ValueError(
                    f"{self.name}.{key}: range ({lo}, {hi}) outside bounds "
                    f"[{hard_lo}, {hard_hi}] or inverted"
                )
            normalized[key] = (lo, hi)
        object.__setattr__(self, "ranges", normalized)

    def effective_ranges(self) -> Dict[str, Tuple[float, float]]:
        """Defaults merged with this spec's overrides, in draw order."""
        entry = _lookup(self.name)
        merged = {}
        for key, (default, _bounds) in entry.params:
            merged[key] = self.ranges.get(key, default)
        return merged


@dataclass(frozen=True)
class PolicySpec:
    """How transforms compose for one run."""

    mode: str
    op_set: Tuple[TransformSpec, ...]
    probability: float = 0.5
    identity_in_set: bool = False

    def __post_init__(self):
        if self.mode not in (PER_OP_MODE, TRIVIAL_MODE):
            raise ValueError(f"mode must be {PER_OP_MODE!r} or {TRIVIAL_MODE!r}")
        object.__setattr__(self, "op_set", tuple(self.op_set))
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError("probability must lie in [0, 1]")
        names = [spec.name for spec in self.op_set]
        if len(set(names)) != len(names):
            raise ValueError("op names must be unique within a policy")
        if self.mode == TRIVIAL_MODE and not self.op_set:
            raise ValueError("trivial_augment needs a nonempty op_set")


def apply_transform(sample: Sample, spec: TransformSpec, rng: SplitMix64) -> Sample:
    """Draw this op's strengths from ``rng`` and apply it.

    Disabled specs act as identity.
    """
    if not spec.enabled:
        return sample
    entry = _lookup(spec.name)
    return entry.apply(sample, spec.effective_ranges(), rng)


def apply_per_op(sample: Sample, spec: TransformSpec, p: float,
                 rng: SplitMix64) -> Sample:
    """Apply ``spec`` with probability ``p``, else return the sample.

    One gate uniform is always consumed; strengths draw from the same
    stream only when the gate passes.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    if rng.random() < p:
        return apply_transform(sample, spec, rng)
    return sample


def trivial_augment(sample: Sample, op_set: Sequence[TransformSpec],
                    rng: SplitMix64, identity_in_set: bool = False) -> Sample:
    """Two-draw composition: draw two slots i.i.d. and apply in order.

    Each slot is uniform over the enabled ops plus one implicit identity
    option (omitted when ``identity_in_set``). Slot indices and strengths
    all draw from ``rng`` sequentially.
    """
    if not op_set:
        raise ValueError("op_set must be nonempty")
    enabled = [spec for spec in op_set if spec.enabled]
    count = len(enabled)
    options = count if identity_in_set else count + 1
    if options == 0:
        raise ValueError("no enabled ops to draw from")
    first = rng.integers(options)
    second = rng.integers(options)
    for index in (first, second):
        if index < count:
            sample = apply_transform(sample, enabled[index], rng)
    return sample


def apply_policy(sample: Sample, policy: PolicySpec) -> Sample:
    """Run one full policy application with per-stage RNG streams.

    Stage streams derive from the sample seed: stage 0 carries the
    selection draws, stage k >= 1 the strengths of position/slot k (see
    module docstring). Fixed (sample, policy) gives bit-identical output.
    """
    selector = SplitMix64(derive_sample_seed(sample.seed, 0))
    if policy.mode == PER_OP_MODE:
        for position, spec in enumerate(policy.op_set):
            if not spec.enabled:
                continue
            if selector.random() < policy.probability:
                rng = SplitMix64(derive_sample_seed(sample.seed, position + 1))
                sample = apply_transform(sample, spec, rng)
        return sample

    enabled = [spec for spec in policy.op_set if spec.enabled]
    count = len(enabled)
    options = count if policy.identity_in_set else count + 1
    if options == 0:
        raise ValueError("no enabled ops to draw from")
    draws = (selector.integers(options), selector.integers(options))
    for slot, index in enumerate(draws):
        if index < count:
            rng = SplitMix64(derive_sample_seed(sample.seed, slot + 1))
            sample = apply_transform(sample, enabled[index], rng)
    return sample


# --- ranking ---------------------------------------------------------------

@dataclass(frozen=True)
class AugStats:
    """Per-augmentation metric summary."""

    name: str
    mean: float
    sem: float
    n: int

    def __post_init__(self):
        if self.sem < 0:
            raise ValueError("sem must be >= 0")
        if self.n < 1:
            raise ValueError("n must be >= 1")

    @classmethod
    def from_runs(cls, name: str, values: Sequence[float]) -> "AugStats":
        """Summarize raw metric runs: mean and SEM = sd/sqrt(n) (ddof=1)."""
        if not values:
            raise ValueError(f"{name}: needs at least one run")
        n = len(values)
        mean = sum(values) / n
        sem = statistics.stdev(values) / math.sqrt(n) if n > 1 else 0.0
        return cls(name=name, mean=mean, sem=sem, n=n)


def relative_improvement(aug_mean: float, base_mean: float) -> float:
    """Delta percent of an augmentation over the baseline mean."""
    if base_mean <= 0:
        raise ZeroBaseline(f"baseline mean must be positive, got {base_mean}")
    return 100.0 * (aug_mean - base_mean) / base_mean


def classify_effect(aug: AugStats, baseline: AugStats) -> str:
    """Place an augmentation against the baseline's SEM band."""
    if aug.mean > baseline.mean + baseline.sem:
        return EFFECTIVE
    if aug.mean < baseline.mean - baseline.sem:
        return HARMFUL
    return INEFFECTIVE


def _ranked(stats: Sequence[AugStats]) -> List[AugStats]:
    return sorted(stats, key=lambda s: (-s.mean, s.name))


def top_n_set(stats: Sequence[AugStats], n: int) -> List[TransformSpec]:
    """The n augmentations with highest mean, as default-range specs.

    Descending mean; ties break lexicographically by name.
    """
    if not 1 <= n <= len(stats):
        raise NOutOfRange(f"n must lie in [1, {len(stats)}], got {n}")
    return [TransformSpec(name=s.name) for s in _ranked(stats)[:n]]


METRIC_LOG_COLUMNS = ("augmentation", "run_id", "metric")
RANKING_COLUMNS = ("augmentation", "mean", "sem", "delta_pct", "category", "rank")
BASELINE_NAME = "none"


def load_metric_log(path) -> Dict[str, List[float]]:
    """Read a metric-log CSV into {augmentation: [metric, ...]}.

    Expects exactly the columns ``augmentation,run_id,metric``; rows stay
    grouped in file order.
    """
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or sorted(reader.fieldnames) != sorted(METRIC_LOG_COLUMNS):
            raise ValueError(
                f"metric log must have columns {','.join(METRIC_LOG_COLUMNS)}, "
                f"got {reader.fieldnames}"
            )
        log: Dict[str, List[float]] = {}
        for row_num, row in enumerate(reader, start=2):
            name = row["augmentation"].strip()
            if not name:
                raise ValueError(f"row {row_num}: empty augmentation name")
            try:
                value = float(row["metric"])
            except ValueError:
                raise ValueError(
                    f"row {row_num}: metric {row['metric']!r} is not a number"
                ) from None
            log.setdefault(name, []).append(value)
    return log


def rank_from_log(log: Dict[str, List[float]], baseline_name: str = BASELINE_NAME,
                  top: Optional[int] = None) -> List[Dict[str, object]]:
    """Rank augmentations in a metric log against its baseline rows.

    Returns ranking rows (dicts keyed by RANKING_COLUMNS), best first.
    The baseline itself is the reference, not a ranked row.
    """
    if baseline_name not in log:
        raise ValueError(f"metric log has no baseline rows named {baseline_name!r}")
    baseline = AugStats.from_runs(baseline_name, log[baseline_name])
    stats = [AugStats.from_runs(name, values)
             for name, values in log.items() if name != baseline_name]
    if not stats:
        raise ValueError("metric log has no augmentation rows")
    ranked = _ranked(stats)
    if top is not None:
        if not 1 <= top <= len(ranked):
            raise NOutOfRange(f"top must lie in [1, {len(ranked)}], got {top}")
        ranked = ranked[:top]
    rows = []
    for position, stat in enumerate(ranked, start=1):
        rows.append({
            "augmentation": stat.name,
            "mean": stat.mean,
            "sem": stat.sem,
            "delta_pct": relative_improvement(stat.mean, baseline.mean),
            "category": classify_effect(stat, baseline),
            "rank": position,
        })
    return rows


def write_ranking_csv(rows: Sequence[Dict[str, object]], path) -> None:
    """Write ranking rows with the canonical column order."""
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(RANKING_COLUMNS))
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


# --- JSON schema -----------------------------------------------------------

def _join(base: str, key: str) -> str:
    return f"{base}.{key}" if base else key


def _require_mapping(obj, path):
    if not isinstance(obj, dict):
        raise SchemaError(path or "policy", "must be an object")
    return obj


def _spec_from_entry(entry, path: str) -> TransformSpec:
    if isinstance(entry, str):
        name, ranges, enabled = entry, {}, True
        name_path = path
    elif isinstance(entry, dict):
        unknown = set(entry) - {"name", "ranges", "enabled"}
        if unknown:
            raise SchemaError(_join(path, sorted(unknown)[0]), "unknown key")
        if "name" not in entry:
            raise SchemaError(_join(path, "name"), "missing")
        name = entry["name"]
        name_path = _join(path, "name")
        if not isinstance(name, str):
            raise SchemaError(name_path, "must be a string")
        ranges = entry.get("ranges", {})
        if not isinstance(ranges, dict):
            raise SchemaError(_join(path, "ranges"), "must be an object")
        enabled = entry.get("enabled", True)
        if not isinstance(enabled, bool):
            raise SchemaError(_join(path, "enabled"), "must be a boolean")
    else:
        raise SchemaError(path, "must be an op name or an object")

    try:
        _lookup(name)
    except UnknownTransform:
        raise SchemaError(name_path, f"unknown transform {name!r}") from None

    normalized_ranges = {}
    for key, bounds in ranges.items():
        range_path = _join(path, f"ranges.{key}")
        if (not isinstance(bounds, (list, tuple)) or len(bounds) != 2
                or not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                           for v in bounds)):
            raise SchemaError(range_path, "must be [low, high] numbers")
        normalized_ranges[key] = (float(bounds[0]), float(bounds[1]))
    try:
        return TransformSpec(name=name, ranges=normalized_ranges, enabled=enabled)
    except ValueError as exc:
        raise SchemaError(_join(path, "ranges"), str(exc)) from None


def transform_spec_from_dict(obj, path: str = "") -> TransformSpec:
    """Validate a single transform JSON entry (name string or object)."""
    return _spec_from_entry(obj, path)


def policy_spec_from_dict(obj, path: str = "") -> PolicySpec:
    """Validate a policy JSON object into a PolicySpec.

    Error paths are relative to the policy object itself (``mode``,
    ``op_set[2].name``, ...); pass ``path`` to prefix them.
    """
    _require_mapping(obj, path)

    mode_path = _join(path, "mode")
    if "mode" not in obj:
        raise SchemaError(mode_path, "missing")
    mode = obj["mode"]
    if mode not in (PER_OP_MODE, TRIVIAL_MODE):
        raise SchemaError(mode_path, f"must be {PER_OP_MODE!r} or {TRIVIAL_MODE!r}")

    allowed = {"mode", "op_set"}
    allowed.add("probability" if mode == PER_OP_MODE else "identity_in_set")
    unknown = set(obj) - allowed
    if unknown:
        key = sorted(unknown)[0]
        reason = "unknown key"
        if key in ("probability", "identity_in_set"):
            reason = f"not valid in {mode} mode"
        raise SchemaError(_join(path, key), reason)

    op_set_path = _join(path, "op_set")
    if "op_set" not in obj:
        raise SchemaError(op_set_path, "missing")
    raw_ops = obj["op_set"]
    if not isinstance(raw_ops, list):
        raise SchemaError(op_set_path, "must be a list")
    specs = [_spec_from_entry(entry, f"{op_set_path}[{i}]")
             for i, entry in enumerate(raw_ops)]

    probability = obj.get("probability", 0.5)
    if not isinstance(probability, (int, float)) or isinstance(probability, bool):
        raise SchemaError(_join(path, "probability"), "must be a number")
    identity_in_set = obj.get("identity_in_set", False)
    if not isinstance(identity_in_set, bool):
        raise SchemaError(_join(path, "identity_in_set"), "must be a boolean")

    try:
        return PolicySpec(mode=mode, op_set=tuple(specs),
                          probability=float(probability),
                          identity_in_set=identity_in_set)
    except ValueError as exc:
        raise SchemaError(path or "policy", str(exc)) from None
