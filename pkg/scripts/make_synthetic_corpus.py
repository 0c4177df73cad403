#!/usr/bin/env python3
"""Generate a synthetic drone-imagery corpus for demos and benchmarks.

Writes green-noise aerial fields to <out>/. A seeded subset carries a red
anomaly patch (the spectral-sweep target) and an independent subset a
magenta patch (what the synthetic detection backend fires on). Two ground
truth files accompany the images:

  gt.json        magenta boxes keyed by manifest record id, for `eval`
  gt_paths.json  the same boxes keyed by relative path, for `prep-train`
"""

from __future__ import annotations

import json
from pathlib import Path

import click
import numpy as np
from PIL import Image

from sartriage.ingest import scan_corpus

MAGENTA = (255, 0, 255)
RED = (220, 30, 40)


def green_field(height: int, width: int, rng: np.random.Generator) -> np.ndarray:
    field = np.zeros((height, width, 3), dtype=np.uint8)
    field[:, :, 1] = rng.integers(90, 111, size=(height, width))
    return field


def place_patch(rng: np.random.Generator, width: int, height: int,
                lo: int, hi: int) -> tuple:
    w = int(rng.integers(lo, hi + 1))
    h = int(rng.integers(lo, hi + 1))
    x = int(rng.integers(16, width - w - 16))
    y = int(rng.integers(16, height - h - 16))
    return x, y, w, h


@click.command()
@click.option("--out", required=True, type=click.Path(),
              help="Corpus directory to create.")
@click.option("--images", "n_images", type=int, default=12)
@click.option("--width", type=int, default=2048)
@click.option("--height", type=int, default=1536)
@click.option("--anomaly-fraction", type=float, default=0.4,
              help="Fraction of images carrying a red anomaly patch.")
@click.option("--person-fraction", type=float, default=0.4,
              help="Fraction of images carrying a magenta detect target.")
@click.option("--seed", type=int, default=0)
def main(out, n_images, width, height, anomaly_fraction, person_fraction,
         seed) -> None:
    rng = np.random.default_rng(seed)
    root = Path(out)
    root.mkdir(parents=True, exist_ok=True)
    boxes_by_path = {}
    n_anomalies = 0
    for i in range(n_images):
        name = f"flight_{i:03d}.png"
        field = green_field(height, width, rng)
        if rng.random() < anomaly_fraction:
            # Sized to survive the 1024px resize above the minimum
            # cluster threshold.
            x, y, w, h = place_patch(rng, width, height, 40, 80)
            field[y:y + h, x:x + w] = RED
            n_anomalies += 1
        boxes = []
        if rng.random() < person_fraction:
            x, y, w, h = place_patch(rng, width, height, 16, 32)
            field[y:y + h, x:x + w] = MAGENTA
            boxes.append([x, y, w, h])
        boxes_by_path[name] = boxes
        Image.fromarray(field).save(root / name)

    manifest = scan_corpus(str(root)).manifest
    id_of = {r.source_path: r.id for r in manifest.records}
    gt = {"images": [{"image_id": id_of[path], "boxes": boxes}
                     for path, boxes in sorted(boxes_by_path.items())]}
    with open(root / "gt.json", "w", encoding="utf-8") as fh:
        json.dump(gt, fh, indent=2)
    gt_paths = {"images": [{"image_id": path, "boxes": boxes}
                           for path, boxes in sorted(boxes_by_path.items())]}
    with open(root / "gt_paths.json", "w", encoding="utf-8") as fh:
        json.dump(gt_paths, fh, indent=2)

    n_people = sum(1 for boxes in boxes_by_path.values() if boxes)
    click.echo(f"{n_images} images in {root} "
               f"({n_anomalies} anomaly patches, {n_people} detect targets)")


if __name__ == "__main__":
    main()
