"""cover-export command line: flags mirror export()."""

from __future__ import annotations

import argparse
import sys

from .errors import ExportError
from .export import export, parse_dims
from .model import BACKENDS


def dims_expr(text: str) -> str:
    try:
        parse_dims(text)
    except ExportError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    return text


def positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return v


def positive_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cover-export",
        description="Export class-wise logits for a dataset and its corrupted "
        "views as interchange NDJSON.",
    )
    parser.add_argument("--model", default="pixel-prototype", choices=sorted(BACKENDS))
    parser.add_argument("--id-root", required=True, help="root/<class>/*.png|jpg")
    parser.add_argument("--ood-root", required=True, help="flat directory of images")
    parser.add_argument("--dims", type=dims_expr, default="original",
                        help="comma list: original,kind:severity,...")
    parser.add_argument("--prompt-template", default="a photo of a {label}",
                        help="label prompt for text-embedding backends")
    parser.add_argument("--out", required=True, help="output NDJSON path")
    parser.add_argument("--image-size", type=positive_int, default=32)
    parser.add_argument("--scale", type=positive_float, default=100.0)
    parser.add_argument("--seed", type=int, default=0,
                        help="seed forwarded to the corrupt command")
    parser.add_argument("--cover-bin", default="cover",
                        help="corrupt command to invoke for non-original dims")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        count = export(
            model_name=args.model,
            id_root=args.id_root,
            ood_root=args.ood_root,
            dims_expr=args.dims,
            prompt_template=args.prompt_template,
            out_path=args.out,
            image_size=args.image_size,
            scale=args.scale,
            seed=args.seed,
            cover_bin=args.cover_bin,
        )
    except (ExportError, OSError) as exc:
        print(f"cover-export: error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {count} records to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
