#!/usr/bin/env python3
"""Write a 5000-image MNIST subset as IDX files.

The images come from the 5000-sample MNIST extract bundled with the
`mlxtend` wheel (500 images per digit). The wheel is fetched with pip into a
temporary directory when it is not already installed. The split is
stratified: 400 images per class go to the training files and 100 per class
to the test files, each set shuffled with a fixed seed.

Usage: make_mnist_subset.py [output_dir]   (default: data/mnist-subset)
"""

import gzip
import io
import pathlib
import random
import struct
import subprocess
import sys
import tempfile
import zipfile

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"
TRAIN_PER_CLASS = 400
SHUFFLE_SEED = 20240601


def read_csv_gz() -> bytes:
    try:
        import mlxtend.data  # noqa: F401

        path = pathlib.Path(mlxtend.data.__file__).parent / "data" / "mnist_5k.csv.gz"
        return path.read_bytes()
    except ImportError:
        pass
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run(
            [sys.executable, "-m", "pip", "download", "--no-deps", "mlxtend==0.24.0", "-d", tmp],
            check=True,
            stdout=subprocess.DEVNULL,
        )
        wheel = next(pathlib.Path(tmp).glob("mlxtend-*.whl"))
        with zipfile.ZipFile(wheel) as z:
            return z.read(MEMBER)


def write_idx(path: pathlib.Path, rows, labels):
    with open(path.with_name(path.name + "-images-idx3-ubyte"), "wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(rows), 28, 28))
        for r in rows:
            f.write(bytes(r))
    with open(path.with_name(path.name + "-labels-idx1-ubyte"), "wb") as f:
        f.write(struct.pack(">II", 0x801, len(labels)))
        f.write(bytes(labels))


def main():
    out = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else "data/mnist-subset")
    out.mkdir(parents=True, exist_ok=True)
    text = gzip.decompress(read_csv_gz()).decode()
    by_class = {c: [] for c in range(10)}
    for line in io.StringIO(text):
        fields = line.strip().split(",")
        if len(fields) != 785:
            continue
        pixels = [int(float(v)) for v in fields[:-1]]
        by_class[int(float(fields[-1]))].append(pixels)

    train, test = [], []
    for c in range(10):
        train += [(p, c) for p in by_class[c][:TRAIN_PER_CLASS]]
        test += [(p, c) for p in by_class[c][TRAIN_PER_CLASS:]]
    rng = random.Random(SHUFFLE_SEED)
    rng.shuffle(train)
    rng.shuffle(test)

    write_idx(out / "train", [p for p, _ in train], [c for _, c in train])
    write_idx(out / "t10k", [p for p, _ in test], [c for _, c in test])
    print(f"wrote {len(train)} training and {len(test)} test images to {out}")


if __name__ == "__main__":
    main()
