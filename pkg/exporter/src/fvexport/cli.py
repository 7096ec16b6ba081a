"""fvexport command line.

Exit codes: 0 success, 1 data error, 2 configuration error.
"""

from __future__ import annotations

import argparse
import sys

from .backbones import ExportConfigError, backbone_names
from .export import ExportConfig, ExportDataError, export


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fvexport",
        description="Export pretrained-backbone feature volumes to the FVL1 dataset layout",
    )
    parser.add_argument("--images", required=True, help="directory of input images (png/jpg)")
    parser.add_argument("--masks", required=True,
                        help="directory of grayscale label masks, one <stem>.png per image")
    parser.add_argument("--out", required=True, help="output dataset directory")
    parser.add_argument("--backbones", default="vgg16,resnet50,mobilenetv3",
                        help=f"comma list from {', '.join(backbone_names())}")
    parser.add_argument("--tap", action="append", default=[], metavar="BACKBONE=LAYER",
                        help="override the tap layer of one backbone (repeatable)")
    parser.add_argument("--input-size", type=int, default=417,
                        help="square resize applied to images and masks (default 417)")
    parser.add_argument("--class-count", type=int, default=20)
    parser.add_argument("--no-pretrained", action="store_true",
                        help="seeded random weights instead of ImageNet weights")
    return parser


def _parse_taps(raw: list[str]) -> dict:
    taps = {}
    for item in raw:
        if "=" not in item:
            raise ExportConfigError(f"--tap expects BACKBONE=LAYER, got {item!r}")
        name, layer = item.split("=", 1)
        taps[name.strip()] = layer.strip()
    return taps


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = ExportConfig(
            images_dir=args.images,
            masks_dir=args.masks,
            out_dir=args.out,
            backbones=tuple(b.strip() for b in args.backbones.split(",") if b.strip()),
            tap_layers=_parse_taps(args.tap),
            input_size=args.input_size,
            class_count=args.class_count,
            pretrained=not args.no_pretrained,
        )
        manifest_path = export(cfg)
    except ExportConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ExportDataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {manifest_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
