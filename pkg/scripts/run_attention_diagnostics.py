#!/usr/bin/env python3
"""Dump activations for a synthetic dataset and chart the attention metrics.

Runs the model three times (unrestricted, kernel-7, kernel-3 local attention)
and writes per-layer attention-distance / NMI tables plus SVG charts, showing
how a locality restriction shrinks the effective receptive field.
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
    ap.add_argument("--out", default="out/attention", help="output directory")
    ap.add_argument("--images", type=int, default=8, help="synthetic image count")
    ap.add_argument("--depth", type=int, default=4)
    ap.add_argument("--heads", type=int, default=2)
    ap.add_argument("--dim", type=int, default=32)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    base = Path(args.out)
    for tag, kernel in (("full", None), ("k7", 7), ("k3", 3)):
        dump = base / f"dump_{tag}"
        cmd = [
            "dump", "--depth", str(args.depth), "--heads", str(args.heads),
            "--dim", str(args.dim), "--patch", "2", "--image-size", "16",
            "--synthetic", str(args.images), "--seed", str(args.seed),
            "--out", str(dump),
        ]
        if kernel is not None:
            cmd += ["--restrict-kernel", str(kernel)]
        run(cmd)
        run(["attn-stats", "--in", str(dump),
             "--out", str(base / f"attn_{tag}.csv"),
             "--json", str(base / f"attn_{tag}.json"),
             "--svg", str(base / f"attn_{tag}.svg")])
        run(["repr-stats", "--in", str(dump),
             "--out", str(base / f"repr_{tag}.csv"),
             "--svg", str(base / f"repr_{tag}.svg")])
    print(f"wrote attention diagnostics under {base}")


if __name__ == "__main__":
    main()
