#!/usr/bin/env python3
"""Convert the digit JSON shipped in the npm `mnist` package to IDX files.

The package (https://www.npmjs.com/package/mnist) carries ~10k MNIST digits
as pixel intensities rounded to three decimals. Every distinct value maps
back to a unique byte via round(v * 255), so the original pixels are
recovered exactly.

Usage:
    npm pack mnist && tar xzf mnist-*.tgz
    python3 scripts/mnist_npm_to_idx.py package/src/digits OUT_DIR [DIGIT ...]

Writes OUT_DIR/images-idx3-ubyte and OUT_DIR/labels-idx1-ubyte. Digits
default to all ten; images are interleaved in the package's per-digit order.
"""

import json
import os
import struct
import sys

SIDE = 28


def main(argv):
    if len(argv) < 3:
        print(__doc__, file=sys.stderr)
        return 2
    src, out = argv[1], argv[2]
    digits = [int(d) for d in argv[3:]] or list(range(10))
    os.makedirs(out, exist_ok=True)

    images = bytearray()
    labels = bytearray()
    count = 0
    for digit in digits:
        with open(os.path.join(src, f"{digit}.json")) as fh:
            data = json.load(fh)["data"]
        n = len(data) // (SIDE * SIDE)
        for i in range(n):
            chunk = data[i * SIDE * SIDE:(i + 1) * SIDE * SIDE]
            images.extend(int(round(v * 255)) for v in chunk)
            labels.append(digit)
        count += n

    with open(os.path.join(out, "images-idx3-ubyte"), "wb") as fh:
        fh.write(struct.pack(">IIII", 0x00000803, count, SIDE, SIDE))
        fh.write(images)
    with open(os.path.join(out, "labels-idx1-ubyte"), "wb") as fh:
        fh.write(struct.pack(">II", 0x00000801, count))
        fh.write(labels)
    print(f"wrote {count} images for digits {digits} to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
