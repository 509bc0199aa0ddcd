"""Command-line interface: segment, refine, combine, and evaluate.

Subcommands mirror the pipeline stages. All numeric defaults are the
pipeline's standard values and every one of them can be overridden for
ablation runs. Set ``TIS_LOG=debug|info|warning`` for logging verbosity.
All outputs are computed before anything is written, and files written by
a failing invocation are removed again, so a non-zero exit leaves no
partial output behind.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from tukeyseg import fusion, metrics
from tukeyseg.io import open_sequence, read_mask_dir, write_mask_pgm
from tukeyseg.refine import RefineConfig, refine_sequence
from tukeyseg.segment import SegmenterConfig, segment_sequence

log = logging.getLogger(__name__)


def _exponent_list(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(part) for part in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad exponent list '{text}'") from exc
    if not values:
        raise argparse.ArgumentTypeError("exponent list must not be empty")
    return values


def _add_segmenter_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--k-fences", type=float, default=1.5,
                        help="outlier fence multiple of the IQR (default 1.5)")
    parser.add_argument("--min-flow-scale", type=float, default=0.5,
                        help="minimum outlier scale for flow measures (default 0.5)")
    parser.add_argument("--vs-exponents", type=_exponent_list, default=(1.0, 0.5, 1.0 / 3.0),
                        metavar="K1,K2,...",
                        help="comma-separated saliency exponents (default 1,0.5,0.333...)")
    parser.add_argument("--connectivity", type=int, choices=(4, 8), default=8,
                        help="segment connectivity (default 8)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tukeyseg",
        description="Video object segmentation from robust outlier statistics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    tis0 = sub.add_parser("tis0", help="segment a video from flow and saliency outliers")
    tis0.add_argument("--input", required=True, help="video directory (frames/flow/saliency layout)")
    tis0.add_argument("--output", required=True, help="directory for %%05d.pgm masks and diagnostics")
    _add_segmenter_args(tis0)
    tis0.add_argument("--jobs", type=int, default=1, help="worker threads for per-frame stages")

    refine = sub.add_parser("refine", help="segment, then refine boundaries with supervoxel consensus")
    refine.add_argument("--input", required=True,
                        help="video directory (frames/flow/saliency/svx layout)")
    refine.add_argument("--output", required=True, help="directory for refined %%05d.pgm masks")
    _add_segmenter_args(refine)
    refine.add_argument("--mode", choices=("local", "nonlocal"), default="nonlocal",
                        help="consensus mode (default nonlocal)")
    refine.add_argument("--w0", type=float, default=None,
                        help="override the local-consensus weight (default 1 local, 1/3 nonlocal)")
    refine.add_argument("--jobs", type=int, default=1)

    combine = sub.add_parser("combine", help="fuse the masks of several methods")
    combine.add_argument("--input", required=True,
                         help="directory whose subdirectories each hold one method's %%05d.pgm masks")
    combine.add_argument("--output", required=True, help="directory for fused masks and the weight report")
    combine.add_argument("--strategy", choices=fusion.STRATEGIES, default="tism",
                         help="fusion rule (default tism)")
    combine.add_argument("--k-fences", type=float, default=1.5)
    combine.add_argument("--jobs", type=int, default=1)

    evaluate = sub.add_parser("eval", help="score predicted masks against ground truth")
    evaluate.add_argument("--input", required=True, help="prediction root (one directory per sequence)")
    evaluate.add_argument("--ground-truth", required=True, help="ground-truth root")
    evaluate.add_argument("--output", default=None, help="also write the CSV table to this file")
    evaluate.add_argument("--tolerance", type=float, default=None,
                          help="contour tolerance in pixels (default: 0.0075 * image diagonal)")
    evaluate.add_argument("--jobs", type=int, default=1)

    return parser


def _write_outputs(directory: Path, files: dict[str, bytes]) -> None:
    """Write all files, removing everything written here if any write fails."""
    directory.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    try:
        for name, data in files.items():
            path = directory / name
            path.write_bytes(data)
            written.append(path)
    except BaseException:
        for path in written:
            path.unlink(missing_ok=True)
        raise


def _mask_files(masks) -> dict[str, bytes]:
    return {f"{i:05d}.pgm": write_mask_pgm(mask) for i, mask in enumerate(masks)}


def _flow_scale_csv(flow_scales) -> bytes:
    lines = ["frame,component,alpha"]
    for index, scales in enumerate(flow_scales):
        for component, alpha in scales.items():
            lines.append(f"{index},{component},{alpha:.12g}")
    return ("\n".join(lines) + "\n").encode()


def _fusion_report_csv(records) -> bytes:
    lines = ["frame,method,count,alpha"]
    for record in records:
        lines.append(f"{record.frame},{record.method},{record.count},{record.alpha:.12g}")
    return ("\n".join(lines) + "\n").encode()


def _segmenter_config(args) -> SegmenterConfig:
    return SegmenterConfig(
        k_fences=args.k_fences,
        vs_exponents=args.vs_exponents,
        min_flow_scale=args.min_flow_scale,
        connectivity=args.connectivity,
    )


def _cmd_tis0(args) -> int:
    seq = open_sequence(args.input)
    result = segment_sequence(seq, _segmenter_config(args), jobs=args.jobs)
    files = _mask_files(result.masks)
    files["flow_alphas.csv"] = _flow_scale_csv(result.flow_scales)
    _write_outputs(Path(args.output), files)
    log.info("wrote %d masks to %s", len(result.masks), args.output)
    return 0


def _cmd_refine(args) -> int:
    seq = open_sequence(args.input)
    ref_cfg = RefineConfig(mode=args.mode, w0=args.w0)
    result = refine_sequence(seq, _segmenter_config(args), ref_cfg, jobs=args.jobs)
    _write_outputs(Path(args.output), _mask_files(result.masks))
    log.info("wrote %d refined masks to %s", len(result.masks), args.output)
    return 0


def _cmd_combine(args) -> int:
    root = Path(args.input)
    if not root.is_dir():
        raise ValueError(f"not a directory: {root}")
    method_dirs = sorted(d for d in root.iterdir() if d.is_dir())
    if not method_dirs:
        raise ValueError(f"{root}: no method directories")
    per_method = [read_mask_dir(d) for d in method_dirs]
    lengths = {len(masks) for masks in per_method}
    if len(lengths) != 1:
        raise ValueError(
            f"{root}: method directories disagree on frame count: "
            + ", ".join(f"{d.name}={len(m)}" for d, m in zip(method_dirs, per_method))
        )
    num_frames = lengths.pop()
    frames = [[masks[i] for masks in per_method] for i in range(num_frames)]
    fused, records = fusion.fuse_sequence(
        frames,
        method_names=[d.name for d in method_dirs],
        strategy=args.strategy,
        k_fences=args.k_fences,
        jobs=args.jobs,
    )
    files = _mask_files(fused)
    files["mask_alphas.csv"] = _fusion_report_csv(records)
    _write_outputs(Path(args.output), files)
    log.info("fused %d methods over %d frames", len(method_dirs), num_frames)
    return 0


def _cmd_eval(args) -> int:
    rows = metrics.evaluate_dataset(
        args.input, args.ground_truth, tolerance=args.tolerance, jobs=args.jobs
    )
    csv = metrics.rows_to_csv(rows)
    sys.stdout.write(csv)
    if args.output:
        out = Path(args.output)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(csv)
    return 0


_COMMANDS = {
    "tis0": _cmd_tis0,
    "refine": _cmd_refine,
    "combine": _cmd_combine,
    "eval": _cmd_eval,
}


def main(argv=None) -> int:
    level = os.environ.get("TIS_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def run() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    run()
