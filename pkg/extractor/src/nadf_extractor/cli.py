"""Command line: ``nadf-extract --recipe file.json --images dir --out dir``.

Exit codes: 0 success, 2 recipe/checkpoint/hook error, 3 no decodable images.
"""

from __future__ import annotations

import argparse
import sys

from .errors import ExtractorError
from .extract import Extractor
from .recipe import builtin_recipe, load_recipe


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nadf-extract",
        description="Capture ViT activations into NADF bundles.")
    parser.add_argument("--recipe", help="extraction recipe JSON; omit to use "
                                         "the built-in toy-model recipe")
    parser.add_argument("--seed", type=int, default=0,
                        help="weight seed for the built-in recipe")
    parser.add_argument("--images", required=True, help="directory of images")
    parser.add_argument("--out", required=True, help="output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        recipe = (load_recipe(args.recipe) if args.recipe
                  else builtin_recipe(args.seed))
        written = Extractor(recipe).extract_directory(args.images, args.out)
    except ExtractorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if not written:
        print("error: no decodable images", file=sys.stderr)
        return 3
    print(f"wrote {len(written)} bundles to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
