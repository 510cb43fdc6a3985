#!/usr/bin/env python3
"""Regenerates tests/fixtures/fusion: two logit heads plus the expected
fused rasters for every strategy, computed here independently of the C++
code (softmax probabilities, explicit class-name lookups)."""

import argparse
import json
import pathlib
import struct

import numpy as np

SPACES = [
    (0, ["road", "sidewalk", "car", "sky", "person"]),
    (7, ["vegetation", "car", "road", "truck"]),
]
HEIGHT, WIDTH = 8, 8
DEFAULT_HEAD = 0
STRATEGIES = ["min-variance", "max-probability", "calibrated-ratio"]


def write_ecat(path, tensor):
    blob = bytearray(b"ECAT")
    blob += struct.pack("<II", 1, 1)
    blob += struct.pack("<I", tensor.ndim)
    blob += struct.pack("<" + "Q" * tensor.ndim, *tensor.shape)
    blob += tensor.astype("<f8").tobytes(order="C")
    path.write_bytes(bytes(blob))


def write_pgm(path, pixels):
    header = f"P5\n{pixels.shape[1]} {pixels.shape[0]}\n255\n".encode()
    path.write_bytes(header + pixels.astype(np.uint8).tobytes())


def softmax(z):
    e = np.exp(z - z.max())
    return e / e.sum()


def first_argmax(values):
    best = 0
    for i, v in enumerate(values):
        if v > values[best]:
            best = i
    return best


def score(z, strategy):
    if strategy == "min-variance":
        return -np.mean((z - z.mean()) ** 2)
    p = np.sort(softmax(z))[::-1]
    if strategy == "max-probability":
        return p[0]
    return p[0] / p[1]


def fuse_pixel(zs, strategy):
    shared = sorted(set.intersection(*(set(c) for _, c in SPACES)))
    scores = [score(z, strategy) for z in zs]
    j = first_argmax(scores)
    names = SPACES[j][1]
    default_names = SPACES[DEFAULT_HEAD][1]
    fallback = first_argmax(list(zs[DEFAULT_HEAD]))
    top = names[first_argmax(list(zs[j]))]
    if top not in shared:
        return fallback, 0
    best = max(shared, key=lambda n: (zs[j][names.index(n)], -shared.index(n)))
    label = default_names.index(best)
    return label, int(label != fallback)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default=str(pathlib.Path(__file__).resolve().parents[1] / "tests/fixtures/fusion"))
    parser.add_argument("--seed", type=int, default=20261016)
    args = parser.parse_args()
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(args.seed)
    volumes = []
    for j, (space_id, classes) in enumerate(SPACES):
        z = rng.normal(0.0, 2.0, size=(len(classes), HEIGHT, WIDTH))
        volumes.append(z)
        write_ecat(out / f"head{j}.ecat", z)
        sidecar = {"classes": classes, "space_id": space_id}
        (out / f"head{j}.ecat.json").write_text(json.dumps(sidecar, indent=2) + "\n")

    for strategy in STRATEGIES:
        labels = np.zeros((HEIGHT, WIDTH), dtype=np.uint8)
        refined = np.zeros((HEIGHT, WIDTH), dtype=np.uint8)
        for h in range(HEIGHT):
            for w in range(WIDTH):
                zs = [v[:, h, w] for v in volumes]
                labels[h, w], refined[h, w] = fuse_pixel(zs, strategy)
        write_pgm(out / f"expected_{strategy}_labels.pgm", labels)
        write_pgm(out / f"expected_{strategy}_refined.pgm", refined)
        print(f"{strategy}: {int(refined.sum())} refined pixels")


if __name__ == "__main__":
    main()
