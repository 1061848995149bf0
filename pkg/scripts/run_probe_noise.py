#!/usr/bin/env python3
"""Layerwise linear probing plus the frequency-band noise robustness curve.

Builds the two-class low-frequency synthetic dataset, dumps activations,
trains probes at every depth, saves the final-depth head, then measures how
much accuracy each 0.1-wide frequency band of injected noise costs.
"""

import argparse
import csv
import sys
from pathlib import Path

from ssl_vit_lens.cli import main as cli
from ssl_vit_lens.images import two_class_lowfreq_dataset, write_pnm


def run(argv):
    code = cli(argv)
    if code != 0:
        sys.exit(code)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/probe_noise")
    ap.add_argument("--images", type=int, default=32)
    ap.add_argument("--size", type=int, default=8)
    ap.add_argument("--rms", type=float, default=0.5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    base = Path(args.out)
    img_dir = base / "images"
    img_dir.mkdir(parents=True, exist_ok=True)
    images, labels = two_class_lowfreq_dataset(args.images, args.size, 3, args.seed)
    with open(base / "labels.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["filename", "label"])
        for i, (img, label) in enumerate(zip(images, labels)):
            name = f"img_{i:04d}.ppm"
            write_pnm(img_dir / name, img.clip(0, 1))
            writer.writerow([f"img_{i:04d}.nad", label])

    dump = base / "dump"
    # patch size 1: mean pooling then only passes the DC content of the noise
    run(["dump", "--depth", "2", "--heads", "2", "--dim", "16",
         "--patch", "1", "--image-size", str(args.size),
         "--images", str(img_dir), "--out", str(dump),
         "--save-weights", str(base / "weights.nadf")])
    run(["probe", "--in", str(dump), "--labels", str(base / "labels.csv"),
         "--lr", "200", "--epochs", "300", "--batch-size", "8",
         "--out", str(base / "probe.csv"), "--svg", str(base / "probe.svg"),
         "--save-head", str(base / "head.json")])
    run(["noise", "--weights", str(base / "weights.nadf"),
         "--head", str(base / "head.json"),
         "--synthetic", str(args.images), "--rms", str(args.rms),
         "--seed", str(args.seed),
         "--out", str(base / "noise.csv"), "--svg", str(base / "noise.svg")])
    print(f"wrote probing and robustness results under {base}")


if __name__ == "__main__":
    main()
