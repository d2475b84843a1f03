#!/usr/bin/env python3
"""Write the 5,000-image MNIST subset bundled with mlxtend as IDX files.

Usage: make_mnist_subset.py OUT_DIR [--wheel PATH]

Without --wheel, the mlxtend wheel is fetched with `pip download`.
"""
import argparse
import gzip
import io
import pathlib
import struct
import subprocess
import sys
import tempfile
import zipfile

CSV_MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def fetch_wheel(tmp: pathlib.Path) -> pathlib.Path:
    subprocess.run([sys.executable, "-m", "pip", "download", "mlxtend", "--no-deps",
                    "-d", str(tmp)], check=True, stdout=subprocess.DEVNULL)
    return next(tmp.glob("mlxtend-*.whl"))


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("out_dir")
    ap.add_argument("--wheel")
    args = ap.parse_args()

    out = pathlib.Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        wheel = pathlib.Path(args.wheel) if args.wheel else fetch_wheel(pathlib.Path(tmp))
        raw = zipfile.ZipFile(wheel).read(CSV_MEMBER)

    pixels = bytearray()
    labels = bytearray()
    for line in gzip.open(io.BytesIO(raw), "rt"):
        fields = [int(float(v)) for v in line.strip().split(",")]
        pixels.extend(fields[:-1])
        labels.append(fields[-1])
    count = len(labels)
    assert len(pixels) == count * 784

    (out / "images-idx3-ubyte").write_bytes(struct.pack(">IIII", 0x803, count, 28, 28) + pixels)
    (out / "labels-idx1-ubyte").write_bytes(struct.pack(">II", 0x801, count) + labels)
    print(f"wrote {count} images to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
