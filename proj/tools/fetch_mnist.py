#!/usr/bin/env python3
"""Writes an MNIST subset as IDX files plus a manifest the dage tools can load.

The only MNIST copy reachable from the package mirror is the 5,000-image
sample bundled with the mlxtend wheel, so that is what this converts. Pass
--wheel to use an already downloaded wheel; otherwise pip fetches it.

    python3 tools/fetch_mnist.py --out data
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

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def fnv1a64(data: bytes) -> str:
    h = 0xCBF29CE484222325
    for b in data:
        h ^= b
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return f"{h:016x}"


def find_wheel(wheel: str | None, tmp: str) -> pathlib.Path:
    if wheel:
        return pathlib.Path(wheel)
    subprocess.run([sys.executable, "-m", "pip", "download", "--no-deps", "-d", tmp, "mlxtend==0.24.0"],
                   check=True, stdout=subprocess.DEVNULL)
    return next(pathlib.Path(tmp).glob("mlxtend-*.whl"))


def read_rows(wheel: pathlib.Path):
    with zipfile.ZipFile(wheel) as zf:
        text = gzip.decompress(zf.read(MEMBER)).decode()
    images, labels = [], []
    for line in io.StringIO(text):
        if not line.strip():
            continue
        values = [int(float(v)) for v in line.split(",")]
        labels.append(values[-1])
        images.append(bytes(values[:-1]))
    return images, labels


def write_idx(path: pathlib.Path, magic: int, dims, payload: bytes) -> None:
    with open(path, "wb") as f:
        f.write(struct.pack(">I", magic))
        for d in dims:
            f.write(struct.pack(">I", d))
        f.write(payload)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default="data", help="output directory (the data root)")
    ap.add_argument("--wheel", help="path to an mlxtend wheel")
    ap.add_argument("--stem", default="mnist-train", help="file name stem")
    args = ap.parse_args()

    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        images, labels = read_rows(find_wheel(args.wheel, tmp))
    if any(len(im) != 784 for im in images):
        sys.exit("unexpected image size in the CSV")

    img_path = out / f"{args.stem}-images.idx"
    lab_path = out / f"{args.stem}-labels.idx"
    write_idx(img_path, 0x00000803, (len(images), 28, 28), b"".join(images))
    write_idx(lab_path, 0x00000801, (len(labels),), bytes(labels))
    manifest = out / f"{args.stem}.manifest"
    manifest.write_text(
        f"# MNIST subset from the mlxtend wheel ({len(images)} images)\n"
        f"name={args.stem}\nimages={img_path.name}\nlabels={lab_path.name}\nclasses=10\n"
        f"checksum={fnv1a64(img_path.read_bytes())}\n")
    print(f"wrote {len(images)} images to {img_path} and {manifest}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
