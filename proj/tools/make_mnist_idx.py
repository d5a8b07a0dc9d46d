#!/usr/bin/env python3
"""Convert the 10k-digit MNIST subset shipped in the npm `mnist` package to IDX.

Usage:
    npm pack mnist && tar xzf mnist-*.tgz
    python3 tools/make_mnist_idx.py package/src/digits data/mnist

The package stores pixels as floats rounded to three decimals; they are mapped
back to bytes with round(v * 255). Samples are shuffled with a fixed seed and
split 8000 / 2000 into train-* and t10k-* files.
"""

import argparse
import json
import pathlib
import random
import struct

TRAIN_COUNT = 8000
SPLIT_SEED = 20240601


def write_images(path, images, rows=28, cols=28):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), rows, cols))
        for img in images:
            f.write(bytes(img))


def write_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(bytes(labels))


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("digits_dir")
    parser.add_argument("out_dir")
    args = parser.parse_args()

    samples = []
    for digit in range(10):
        with open(pathlib.Path(args.digits_dir) / f"{digit}.json") as f:
            flat = json.load(f)["data"]
        for i in range(len(flat) // 784):
            px = [min(255, max(0, round(v * 255))) for v in flat[i * 784:(i + 1) * 784]]
            samples.append((px, digit))

    random.Random(SPLIT_SEED).shuffle(samples)
    out = pathlib.Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    train, test = samples[:TRAIN_COUNT], samples[TRAIN_COUNT:]
    write_images(out / "train-images-idx3-ubyte", [s[0] for s in train])
    write_labels(out / "train-labels-idx1-ubyte", [s[1] for s in train])
    write_images(out / "t10k-images-idx3-ubyte", [s[0] for s in test])
    write_labels(out / "t10k-labels-idx1-ubyte", [s[1] for s in test])
    print(f"wrote {len(train)} train / {len(test)} test samples to {out}")


if __name__ == "__main__":
    main()
