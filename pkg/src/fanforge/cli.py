"""Command line interface.

Subcommands: augment (batch engine), mask (scan-mask extraction),
preview (augmentation grid), bench (per-op latency), rank (effect
ranking from metric logs). Exit codes: 0 success, 1 per-sample failures
occurred, 2 invalid config/manifest/arguments.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

from . import kernels, pipeline, pngio, scanmask
from .core import Sample, ScanMask
from .errors import EmptyMask, FanforgeError
from .policy import OP_NAMES, TransformSpec
import numpy as np


def _parse_ops(text: str):
    if text == "all":
        return list(OP_NAMES)
    names = [part.strip() for part in text.split(",") if part.strip()]
    if not names:
        raise ValueError("op list is empty")
    return names


def _cmd_augment(args) -> int:
    config = pipeline.load_config(args.config)
    if args.workers is not None:
        config = dataclasses.replace(config, workers=args.workers)
    summary = pipeline.run_batch(config, dry_run=args.dry_run)
    if args.dry_run:
        print(f"dry run: {summary['planned']} task(s) validated, nothing written")
        return 0
    print(f"processed {summary['processed']}, errored {summary['errored']}, "
          f"wall time {summary['wall_time']:.2f}s")
    for failure in summary["failures"]:
        print(f"  failed {failure['id']} v{failure['variant']}: {failure['error']}",
              file=sys.stderr)
    return 1 if summary["errored"] else 0


def _cmd_mask(args) -> int:
    entries = pipeline.load_manifest(args.manifest)
    params = scanmask.MaskGenParams(intensity_threshold=args.threshold,
                                    closing_radius=args.closing)
    os.makedirs(args.out, exist_ok=True)
    failed = 0
    for entry in entries:
        image = pngio.load_image(entry.image_path)
        try:
            mask = scanmask.generate_scan_mask(image, params)
        except EmptyMask as exc:
            print(f"  {entry.id}: {exc}", file=sys.stderr)
            failed += 1
            continue
        pngio.save_scan_mask(os.path.join(args.out, f"{entry.id}__scan.png"), mask)
    print(f"wrote {len(entries) - failed} mask(s) to {args.out}, {failed} failed")
    return 1 if failed else 0


def _cmd_preview(args) -> int:
    names = _parse_ops(args.ops)
    specs = [TransformSpec(name=name) for name in names]
    image = pngio.load_image(args.image)
    try:
        scan = scanmask.generate_scan_mask(image)
    except EmptyMask:
        # Preview is illustrative: fall back to a full-frame mask rather
        # than refusing to render ops that need one.
        scan = ScanMask(np.ones(image.shape, dtype=np.uint8))
    stem = os.path.splitext(os.path.basename(args.image))[0] or "preview"
    sample = Sample(id=stem, image=image, scan_mask=scan, seed=args.seed)
    out = pipeline.emit_preview_grid(sample, specs, args.variants, args.out)
    print(f"wrote {len(specs)}x{1 + args.variants} grid to {out}")
    return 0


def _cmd_bench(args) -> int:
    op_filter = _parse_ops(args.ops) if args.ops else None
    rows = pipeline.bench(args.reps, op_filter=op_filter)
    print(f"active speckle backend: {kernels.ACTIVE_BACKEND}")
    print(pipeline.format_bench_report(rows))
    if args.compare_backends:
        print()
        print("speckle backends:")
        print(pipeline.format_bench_report(pipeline.bench_backends(args.reps)))
    return 0


def _cmd_rank(args) -> int:
    from . import policy

    log = policy.load_metric_log(args.metrics)
    rows = policy.rank_from_log(log, baseline_name=args.baseline, top=args.top)
    policy.write_ranking_csv(rows, args.out)
    print(f"wrote {len(rows)} ranked augmentation(s) to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fanforge",
        description="Deterministic augmentation engine for fan-beam B-mode ultrasound.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_augment = sub.add_parser("augment", help="run a batch augmentation config")
    p_augment.add_argument("--config", required=True, help="run config JSON")
    p_augment.add_argument("--workers", type=int, default=None,
                           help="override config worker count")
    p_augment.add_argument("--dry-run", action="store_true",
                           help="validate config and manifest, write nothing")
    p_augment.set_defaults(handler=_cmd_augment)

    p_mask = sub.add_parser("mask", help="extract scan masks for a manifest")
    p_mask.add_argument("--manifest", required=True, help="input manifest JSONL")
    p_mask.add_argument("--out", required=True, help="output directory")
    p_mask.add_argument("--threshold", type=float, default=4.0 / 255.0,
                        help="intensity threshold (default 4/255)")
    p_mask.add_argument("--closing", type=int, default=5,
                        help="closing disk radius in pixels (default 5)")
    p_mask.set_defaults(handler=_cmd_mask)

    p_preview = sub.add_parser("preview", help="render an augmentation grid")
    p_preview.add_argument("--image", required=True, help="input PNG")
    p_preview.add_argument("--ops", default="all",
                           help="comma-separated op names, or 'all'")
    p_preview.add_argument("--variants", type=int, default=3,
                           help="variants per op (default 3)")
    p_preview.add_argument("--seed", type=int, default=0, help="grid seed")
    p_preview.add_argument("--out", required=True, help="output PNG")
    p_preview.set_defaults(handler=_cmd_preview)

    p_bench = sub.add_parser("bench", help="per-op latency report")
    p_bench.add_argument("--reps", type=int, required=True,
                         help=f"repetitions per op (>= {pipeline.BENCH_MIN_REPS})")
    p_bench.add_argument("--ops", default=None,
                         help="comma-separated op names (default: all 14)")
    p_bench.add_argument("--compare-backends", action="store_true",
                         help="also time every installed speckle backend")
    p_bench.set_defaults(handler=_cmd_bench)

    p_rank = sub.add_parser("rank", help="rank augmentations from a metric log")
    p_rank.add_argument("--metrics", required=True,
                        help="CSV with columns augmentation,run_id,metric")
    p_rank.add_argument("--baseline", default="none",
                        help="name of the baseline row set (default: none)")
    p_rank.add_argument("--out", required=True, help="output ranking CSV")
    p_rank.add_argument("--top", type=int, default=None, help="keep only the top N rows")
    p_rank.set_defaults(handler=_cmd_rank)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except (FanforgeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
