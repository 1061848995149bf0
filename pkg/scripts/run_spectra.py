#!/usr/bin/env python3
"""Fourier and singular-value spectra over a synthetic activation dataset.

Produces the relative-log-amplitude table (per layer, 11 radial bins) and
token-level / image-level singular value spectra with their delta-log curves.
"""

import argparse
import sys
from pathlib import Path

from ssl_vit_lens.cli import main as cli


def run(argv):
    code = cli(argv)
    if code != 0:
        sys.exit(code)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/spectra")
    ap.add_argument("--images", type=int, default=12)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    base = Path(args.out)
    dump = base / "dump"
    run(["dump", "--depth", "4", "--heads", "2", "--dim", "32",
         "--patch", "2", "--image-size", "16",
         "--synthetic", str(args.images), "--seed", str(args.seed),
         "--out", str(dump)])
    run(["fourier", "--in", str(dump), "--out", str(base / "fourier.csv"),
         "--svg", str(base / "fourier.svg")])
    run(["svd", "--in", str(dump), "--level", "token",
         "--out", str(base / "svd_token.csv"), "--svg", str(base / "svd_token.svg")])
    run(["svd", "--in", str(dump), "--level", "image",
         "--out", str(base / "svd_image.csv"), "--svg", str(base / "svd_image.svg")])
    print(f"wrote spectra under {base}")


if __name__ == "__main__":
    main()
