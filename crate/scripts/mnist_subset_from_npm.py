#!/usr/bin/env python3
"""Convert the 10,000 MNIST digits shipped in the `mnist` npm package into IDX files.

Usage:
    npm pack mnist && tar xzf mnist-*.tgz
    python3 scripts/mnist_subset_from_npm.py package/src/digits data/mnist-subset

Every fifth sample of each digit goes to the test split; the rest form the
training split. Both splits are shuffled with a fixed seed.
"""
import gzip
import json
import random
import struct
import sys
from pathlib import Path


def write_images(path, images):
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), 28, 28))
        for img in images:
            f.write(bytes(img))


def write_labels(path, labels):
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(bytes(labels))


def main(src, dst):
    src, dst = Path(src), Path(dst)
    train, test = [], []
    for digit in range(10):
        flat = json.loads((src / f"{digit}.json").read_text())["data"]
        assert len(flat) % 784 == 0
        for idx in range(len(flat) // 784):
            pixels = [min(255, max(0, round(v * 255))) for v in flat[idx * 784:(idx + 1) * 784]]
            (test if idx % 5 == 4 else train).append((pixels, digit))
    rng = random.Random(0)
    rng.shuffle(train)
    rng.shuffle(test)
    dst.mkdir(parents=True, exist_ok=True)
    for name, split in (("train", train), ("t10k", test)):
        write_images(dst / f"{name}-images-idx3-ubyte.gz", [p for p, _ in split])
        write_labels(dst / f"{name}-labels-idx1-ubyte.gz", [l for _, l in split])
        print(f"{name}: {len(split)} samples")


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
