"""Command line: ``fishfeat --input TREE --out FILE [--backbone NAME] ...``"""

import argparse
import sys
from pathlib import Path

from .backbones import names
from .extract import ExtractJob, extract
from .hcf import sidecar
from .layout import LayoutError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fishfeat",
        description="embed a group/species/fish_id/frame_id image tree"
                    " into a binary feature file plus taxonomy sidecar",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("--input", required=True, help="root of the image tree")
    parser.add_argument("--out", required=True, help="feature file to write")
    parser.add_argument("--backbone", choices=names(), default="resnet18",
                        help="vision backbone (seed-initialized unless --weights is given)")
    parser.add_argument("--weights", default=None,
                        help="state_dict file for the chosen backbone")
    parser.add_argument("--batch-size", type=int, default=16, help="images per forward pass")
    parser.add_argument("--device", default="cpu", help="torch device to run on")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    job = ExtractJob(
        root=Path(args.input),
        out=Path(args.out),
        backbone=args.backbone,
        batch_size=args.batch_size,
        device=args.device,
        weights=Path(args.weights) if args.weights else None,
    )
    try:
        summary = extract(job)
    except (LayoutError, RuntimeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    skipped = f", {summary.skipped} skipped" if summary.skipped else ""
    print(f"wrote {job.out} and {sidecar(job.out)}"
          f" ({summary.written} records, dim {summary.dim}{skipped})")
    print(f"backbone {job.backbone} weights sha256 {summary.checksum[:16]}... (unchanged)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
