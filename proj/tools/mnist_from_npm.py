#!/usr/bin/env python3
"""Build MNIST IDX files from the digits bundled in the `mnist` npm package.

The npm package ships 10,000 real MNIST digits as JSON arrays of byte/255
values rounded to three decimals. Rounding back to bytes is exact because the
rounding error (< 0.0005 * 255) stays below half a byte.

Usage: mnist_from_npm.py <package-dir> <output-dir> [--train 8000] [--seed 20231016]
"""
import argparse
import json
import random
import struct
from pathlib import Path


def write_idx_images(path, images):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), 28, 28))
        for img in images:
            f.write(bytes(img))


def write_idx_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(bytes(labels))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("package_dir", type=Path)
    ap.add_argument("output_dir", type=Path)
    ap.add_argument("--train", type=int, default=8000)
    ap.add_argument("--seed", type=int, default=20231016)
    args = ap.parse_args()

    samples = []
    for digit in range(10):
        raw = json.loads((args.package_dir / "src" / "digits" / f"{digit}.json").read_text())["data"]
        assert len(raw) % 784 == 0
        for i in range(len(raw) // 784):
            px = [int(round(v * 255)) for v in raw[i * 784:(i + 1) * 784]]
            samples.append((px, digit))

    random.Random(args.seed).shuffle(samples)
    train, test = samples[:args.train], samples[args.train:]
    out = args.output_dir
    out.mkdir(parents=True, exist_ok=True)
    write_idx_images(out / "train-images-idx3-ubyte", [s[0] for s in train])
    write_idx_labels(out / "train-labels-idx1-ubyte", [s[1] for s in train])
    write_idx_images(out / "t10k-images-idx3-ubyte", [s[0] for s in test])
    write_idx_labels(out / "t10k-labels-idx1-ubyte", [s[1] for s in test])
    print(f"wrote {len(train)} train / {len(test)} test images to {out}")


if __name__ == "__main__":
    main()
