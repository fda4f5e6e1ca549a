"""Dataset manifests, run configuration, and the deterministic batch engine.

A dataset is a JSONL manifest: one object per line with keys ``id``
(filesystem-safe, unique), ``image_path``, optional ``scan_mask_path``,
``label_mask_path``, ``label`` (int), and ``split`` (train|val|test,
default train). Paths resolve relative to the manifest's directory.

A run is a JSON config, schema version 1; unknown keys anywhere are
errors:

    {
      "schema": 1,
      "global_seed": 1234,
      "policy": {"mode": "trivial_augment", "op_set": ["rotate", ...]},
      "preprocess": {"crop_mode": false},
      "io": {"input_manifest": "data/manifest.jsonl",
             "output_dir": "out", "format": "png8"},
      "workers": 1,
      "variants_per_sample": 1
    }

The env var ``FANFORGE_SEED`` overrides ``global_seed``. I/O paths
resolve relative to the config file's directory.

Determinism: variant v of entry i gets seed
derive_sample_seed(global_seed, i * variants_per_sample + v); each task
is a pure function of (entry files, seed, policy) and writes only its
own output files, so output bytes are identical for any worker count and
schedule, and appending manifest entries never changes earlier outputs.
Output dimensions follow the applied ops: crop_mode runs resize to
256x256 and rely on a ``random_crop`` op in the policy for the 224x224
window (a policy that skips it leaves that variant at 256x256).
"""

from __future__ import annotations

import json
import os
import re
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import kernels, pngio, stdaug, synthetic, usaug
from .core import ImageBuffer, Sample
from .errors import DuplicateId, MissingFile, ParseError, SchemaError
from .policy import (
    OP_NAMES,
    PolicySpec,
    TransformSpec,
    apply_policy,
    policy_spec_from_dict,
)
from .rng import MASK64, SplitMix64, derive_sample_seed

_ID_PATTERN = re.compile(r"^[A-Za-z0-9._-]+$")
_SPLITS = ("train", "val", "test")

ENV_SEED = "FANFORGE_SEED"


@dataclass(frozen=True)
class ManifestEntry:
    id: str
    image_path: str
    scan_mask_path: Optional[str] = None
    label_mask_path: Optional[str] = None
    label: Optional[int] = None
    split: str = "train"


@dataclass(frozen=True)
class RunConfig:
    global_seed: int
    policy: PolicySpec
    input_manifest: str
    output_dir: str
    crop_mode: bool = False
    out_format: str = "png8"
    workers: int = 1
    variants_per_sample: int = 1

    def __post_init__(self):
        if not 0 <= self.global_seed <= MASK64:
            raise ValueError("global_seed must fit in 64 bits")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.variants_per_sample < 1:
            raise ValueError("variants_per_sample must be >= 1")
        if self.out_format != "png8":
            raise ValueError(f"unsupported output format {self.out_format!r}")


def load_manifest(path) -> List[ManifestEntry]:
    """Parse a JSONL manifest, preserving line order.

    Raises ParseError (bad JSON / bad fields, with line number),
    DuplicateId, or MissingFile (referenced file absent).
    """
    base = os.path.dirname(os.path.abspath(path))
    entries: List[ManifestEntry] = []
    seen = set()
    with open(path) as fh:
        for line_num, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            try:
                obj = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ParseError(line_num, f"invalid JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise ParseError(line_num, "entry must be an object")
            unknown = set(obj) - {"id", "image_path", "scan_mask_path",
                                  "label_mask_path", "label", "split"}
            if unknown:
                raise ParseError(line_num, f"unknown key {sorted(unknown)[0]!r}")
            entry_id = obj.get("id")
            if not isinstance(entry_id, str) or not _ID_PATTERN.match(entry_id):
                raise ParseError(line_num, "id must match [A-Za-z0-9._-]+")
            if entry_id in seen:
                raise DuplicateId(line_num, entry_id)
            seen.add(entry_id)
            image_path = obj.get("image_path")
            if not isinstance(image_path, str) or not image_path:
                raise ParseError(line_num, "image_path must be a nonempty string")
            label = obj.get("label")
            if label is not None and (isinstance(label, bool) or not isinstance(label, int)):
                raise ParseError(line_num, "label must be an integer")
            split = obj.get("split", "train")
            if split not in _SPLITS:
                raise ParseError(line_num, f"split must be one of {_SPLITS}")
            paths = {}
            for key in ("image_path", "scan_mask_path", "label_mask_path"):
                value = obj.get(key)
                if value is None:
                    continue
                if not isinstance(value, str) or not value:
                    raise ParseError(line_num, f"{key} must be a nonempty string")
                paths[key] = os.path.join(base, value)
            entries.append(ManifestEntry(
                id=entry_id,
                image_path=paths["image_path"],
                scan_mask_path=paths.get("scan_mask_path"),
                label_mask_path=paths.get("label_mask_path"),
                label=label,
                split=split,
            ))
    for entry in entries:
        for file_path in (entry.image_path, entry.scan_mask_path, entry.label_mask_path):
            if file_path is not None and not os.path.isfile(file_path):
                raise MissingFile(entry.id, file_path)
    return entries


def _expect_mapping(obj, path):
    if not isinstance(obj, dict):
        raise SchemaError(path, "must be an object")
    return obj


def _reject_unknown(obj, allowed, path):
    unknown = set(obj) - set(allowed)
    if unknown:
        key = sorted(unknown)[0]
        raise SchemaError(f"{path}.{key}" if path else key, "unknown key")


def load_config(path) -> RunConfig:
    """Load and validate a run config; see module docstring for the schema."""
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError("<document>", f"invalid JSON ({exc.msg})") from None
    _expect_mapping(obj, "<document>")
    _reject_unknown(obj, ("schema", "global_seed", "policy", "preprocess",
                          "io", "workers", "variants_per_sample"), "")

    if obj.get("schema") != 1:
        raise SchemaError("schema", "must be 1")
    if "global_seed" not in obj:
        raise SchemaError("global_seed", "missing")
    global_seed = obj["global_seed"]
    if isinstance(global_seed, bool) or not isinstance(global_seed, int):
        raise SchemaError("global_seed", "must be an integer")
    if not 0 <= global_seed <= MASK64:
        raise SchemaError("global_seed", "must fit in 64 bits")

    env_seed = os.environ.get(ENV_SEED)
    if env_seed is not None and env_seed != "":
        try:
            global_seed = int(env_seed, 0)
        except ValueError:
            raise SchemaError("global_seed", f"{ENV_SEED}={env_seed!r} is not an integer") from None
        if not 0 <= global_seed <= MASK64:
            raise SchemaError("global_seed", f"{ENV_SEED} must fit in 64 bits")

    if "policy" not in obj:
        raise SchemaError("policy", "missing")
    policy = policy_spec_from_dict(obj["policy"], path="policy")

    crop_mode = False
    if "preprocess" in obj:
        pre = _expect_mapping(obj["preprocess"], "preprocess")
        _reject_unknown(pre, ("crop_mode",), "preprocess")
        crop_mode = pre.get("crop_mode", False)
        if not isinstance(crop_mode, bool):
            raise SchemaError("preprocess.crop_mode", "must be a boolean")

    if "io" not in obj:
        raise SchemaError("io", "missing")
    io_obj = _expect_mapping(obj["io"], "io")
    _reject_unknown(io_obj, ("input_manifest", "output_dir", "format"), "io")
    base = os.path.dirname(os.path.abspath(path))
    resolved = {}
    for key in ("input_manifest", "output_dir"):
        value = io_obj.get(key)
        if not isinstance(value, str) or not value:
            raise SchemaError(f"io.{key}", "must be a nonempty string")
        resolved[key] = os.path.join(base, value)
    out_format = io_obj.get("format", "png8")
    if out_format != "png8":
        raise SchemaError("io.format", "must be 'png8'")

    workers = obj.get("workers", 1)
    if isinstance(workers, bool) or not isinstance(workers, int) or workers < 1:
        raise SchemaError("workers", "must be an integer >= 1")
    variants = obj.get("variants_per_sample", 1)
    if isinstance(variants, bool) or not isinstance(variants, int) or variants < 1:
        raise SchemaError("variants_per_sample", "must be an integer >= 1")

    return RunConfig(
        global_seed=global_seed,
        policy=policy,
        input_manifest=resolved["input_manifest"],
        output_dir=resolved["output_dir"],
        crop_mode=crop_mode,
        out_format=out_format,
        workers=workers,
        variants_per_sample=variants,
    )


def load_sample(entry: ManifestEntry, seed: int) -> Sample:
    """Materialize a manifest entry's rasters into a Sample."""
    image = pngio.load_image(entry.image_path)
    scan = pngio.load_scan_mask(entry.scan_mask_path) if entry.scan_mask_path else None
    label_mask = (pngio.load_label_mask(entry.label_mask_path)
                  if entry.label_mask_path else None)
    return Sample(id=entry.id, image=image, scan_mask=scan,
                  label_mask=label_mask, label=entry.label, seed=seed)


def process_sample(sample: Sample, policy: PolicySpec, crop_mode: bool) -> Sample:
    """The per-sample engine path: preprocess, then apply the policy."""
    return apply_policy(stdaug.preprocess(sample, crop_mode=crop_mode), policy)


def _output_paths(output_dir: str, entry_id: str, variant: int,
                  with_scan: bool, with_label: bool) -> Dict[str, str]:
    stem = os.path.join(output_dir, f"{entry_id}__v{variant}")
    paths = {"image": f"{stem}.png"}
    if with_scan:
        paths["scan"] = f"{stem}__scan.png"
    if with_label:
        paths["label"] = f"{stem}__label.png"
    return paths


def _run_task(task) -> Tuple[str, int, Optional[str]]:
    entry, variant, seed, policy, crop_mode, output_dir = task
    try:
        sample = load_sample(entry, seed)
        result = process_sample(sample, policy, crop_mode)
        paths = _output_paths(output_dir, entry.id, variant,
                              result.scan_mask is not None,
                              result.label_mask is not None)
        pngio.save_image(paths["image"], result.image)
        if result.scan_mask is not None:
            pngio.save_scan_mask(paths["scan"], result.scan_mask)
        if result.label_mask is not None:
            pngio.save_label_mask(paths["label"], result.label_mask)
    except Exception as exc:  # per-sample failures must never abort the batch
        return entry.id, variant, f"{type(exc).__name__}: {exc}"
    return entry.id, variant, None


def run_batch(config: RunConfig, dry_run: bool = False) -> Dict[str, object]:
    """Run one config over its manifest.

    Returns {"processed", "errored", "wall_time", "failures"}; with
    dry_run=True validates everything, writes nothing, and reports the
    planned task count instead.
    """
    started = time.perf_counter()
    entries = load_manifest(config.input_manifest)
    variants = config.variants_per_sample
    tasks = [
        (entry, v, derive_sample_seed(config.global_seed, index * variants + v),
         config.policy, config.crop_mode, config.output_dir)
        for index, entry in enumerate(entries)
        for v in range(variants)
    ]
    if dry_run:
        return {"processed": 0, "errored": 0, "planned": len(tasks),
                "wall_time": time.perf_counter() - started, "failures": []}

    os.makedirs(config.output_dir, exist_ok=True)
    if config.workers == 1:
        results = map(_run_task, tasks)
    else:
        chunk = max(1, len(tasks) // (config.workers * 4))
        pool = ProcessPoolExecutor(max_workers=config.workers)
        try:
            results = list(pool.map(_run_task, tasks, chunksize=chunk))
        finally:
            pool.shutdown()

    processed = 0
    failures: List[Dict[str, object]] = []
    for entry_id, variant, error in results:
        if error is None:
            processed += 1
        else:
            failures.append({"id": entry_id, "variant": variant, "error": error})
    return {
        "processed": processed,
        "errored": len(failures),
        "wall_time": time.perf_counter() - started,
        "failures": failures,
    }


BENCH_MIN_REPS = 30


def bench(repetitions: int, op_filter: Optional[Sequence[str]] = None) -> List[Dict[str, object]]:
    """Per-op latency on a synthetic 224x224 fan sample.

    Each rep measures one full policy-style application: parameter draws
    plus the transform. Rows are sorted by mean latency, slowest first.
    """
    if repetitions < BENCH_MIN_REPS:
        raise ValueError(f"repetitions must be >= {BENCH_MIN_REPS}")
    names = tuple(op_filter) if op_filter else OP_NAMES
    specs = [TransformSpec(name=name) for name in names]
    sample = synthetic.make_fan_sample("bench", 224, 224, seed=2024)
    # random_crop consumes a 256x256 input by contract, so it gets its own
    # sample; every other op is timed on the standard 224x224 frame.
    crop_sample = synthetic.make_fan_sample("bench-crop", 256, 256, seed=2024)

    from .policy import apply_transform

    rows = []
    for position, spec in enumerate(specs):
        rng = SplitMix64(derive_sample_seed(0xBE9C8, position))
        subject = crop_sample if spec.name == "random_crop" else sample
        times = []
        for _ in range(repetitions):
            t0 = time.perf_counter()
            apply_transform(subject, spec, rng)
            times.append((time.perf_counter() - t0) * 1e3)
        rows.append({
            "op": spec.name,
            "mean_ms": sum(times) / len(times),
            "median_ms": statistics.median(times),
            "min_ms": min(times),
        })
    rows.sort(key=lambda r: -r["mean_ms"])
    return rows


def bench_backends(repetitions: int) -> List[Dict[str, object]]:
    """Latency of each installed speckle backend at fixed mid-range sigmas."""
    if repetitions < BENCH_MIN_REPS:
        raise ValueError(f"repetitions must be >= {BENCH_MIN_REPS}")
    sample = synthetic.make_fan_sample("bench", 224, 224, seed=2024)
    params = usaug.BilateralParams(sigma_spatial=0.6, sigma_color=0.3)
    rows = []
    for backend in kernels.available_backends():
        fn = kernels.get_bilateral(backend)
        times = []
        for _ in range(repetitions):
            t0 = time.perf_counter()
            fn(sample.image.data, params.sigma_spatial, params.sigma_color,
               params.window_size)
            times.append((time.perf_counter() - t0) * 1e3)
        rows.append({
            "backend": backend,
            "mean_ms": sum(times) / len(times),
            "median_ms": statistics.median(times),
        })
    return rows


def format_bench_report(rows: Sequence[Dict[str, object]]) -> str:
    """Fixed-width text table for bench rows (op or backend keyed)."""
    key = "op" if rows and "op" in rows[0] else "backend"
    headers = [key] + [c for c in ("mean_ms", "median_ms", "min_ms") if c in rows[0]]
    widths = {h: max(len(h), max(len(_fmt_cell(row.get(h))) for row in rows))
              for h in headers}
    lines = ["  ".join(h.ljust(widths[h]) for h in headers)]
    lines.append("  ".join("-" * widths[h] for h in headers))
    for row in rows:
        lines.append("  ".join(_fmt_cell(row.get(h)).ljust(widths[h]) for h in headers))
    return "\n".join(lines)


def _fmt_cell(value) -> str:
    if isinstance(value, float):
        return f"{value:.3f}"
    return str(value)


def emit_preview_grid(sample: Sample, op_set: Sequence[TransformSpec],
                      variants_per_op: int, out_path) -> str:
    """Write a PNG grid: one row per op, first column the input, then
    ``variants_per_op`` independently drawn variants.

    Cell (i, j >= 1) uses the stream seeded with
    derive_sample_seed(sample.seed, i * variants_per_op + j), so grids
    are byte-stable for a fixed sample seed.
    """
    if variants_per_op < 1:
        raise ValueError("variants_per_op must be >= 1")
    if not op_set:
        raise ValueError("op_set must be nonempty")
    from .policy import apply_transform

    height, width = sample.image.shape
    grid = np.zeros((len(op_set) * height, (1 + variants_per_op) * width))
    for i, spec in enumerate(op_set):
        grid[i * height:(i + 1) * height, 0:width] = sample.image.data
        for j in range(1, variants_per_op + 1):
            rng = SplitMix64(derive_sample_seed(sample.seed, i * variants_per_op + j))
            cell_img = apply_transform(sample, spec, rng).image.data
            if cell_img.shape != (height, width):
                cell_img = _fit_cell(cell_img, height, width)
            grid[i * height:(i + 1) * height, j * width:(j + 1) * width] = cell_img
    pngio.save_image(out_path, ImageBuffer(grid))
    return str(out_path)


def _fit_cell(arr: np.ndarray, height: int, width: int) -> np.ndarray:
    """Center-place a differently sized result (e.g. random_crop output)
    onto a zero canvas so grid rows stay aligned."""
    canvas = np.zeros((height, width))
    src_h = min(height, arr.shape[0])
    src_w = min(width, arr.shape[1])
    top = (height - src_h) // 2
    left = (width - src_w) // 2
    arr_top = (arr.shape[0] - src_h) // 2
    arr_left = (arr.shape[1] - src_w) // 2
    canvas[top:top + src_h, left:left + src_w] = \
        arr[arr_top:arr_top + src_h, arr_left:arr_left + src_w]
    return canvas
