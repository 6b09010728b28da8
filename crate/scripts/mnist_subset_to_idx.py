#!/usr/bin/env python3
"""Convert the 5,000-digit MNIST subset bundled in the mlxtend wheel to IDX files.

Usage: pip download --no-deps mlxtend -d /tmp/mlx
       python3 scripts/mnist_subset_to_idx.py /tmp/mlx/mlxtend-*.whl data/mnist
"""
import gzip
import struct
import sys
import zipfile
from pathlib import Path


def main(wheel: str, out_dir: str) -> None:
    raw = zipfile.ZipFile(wheel).read("mlxtend/data/data/mnist_5k.csv.gz")
    rows = gzip.decompress(raw).decode().strip().split("\n")
    pixels = bytearray()
    labels = bytearray()
    for row in rows:
        values = [int(v) for v in row.split(",")]
        pixels.extend(values[:784])
        labels.append(values[784])
    n = len(rows)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    # mtime=0 keeps the gzip output byte-stable across runs.
    with open(out / "train-images-idx3-ubyte.gz", "wb") as f:
        f.write(gzip.compress(struct.pack(">IIII", 0x803, n, 28, 28) + bytes(pixels), mtime=0))
    with open(out / "train-labels-idx1-ubyte.gz", "wb") as f:
        f.write(gzip.compress(struct.pack(">II", 0x801, n) + bytes(labels), mtime=0))
    print(f"wrote {n} samples to {out}")


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
