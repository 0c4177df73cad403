"""Training-sample generation: split, crop sampling, augmentation,
normalization.

Images are rescaled by a uniform random factor in [0.7, 1.1] (aspect ratio
preserved), then a fixed-size crop is taken either uniformly at random or,
with equal likelihood when ground-truth boxes exist, positioned uniformly
among placements that fully contain one randomly selected box. Boxes are
clipped to the crop and dropped when less than 25% of their area survives.

Geometric augmentation transforms pixels and boxes together; photometric
augmentation (Gaussian noise, brightness/contrast, color jitter, plus an
optional pluggable extra stage) leaves boxes untouched.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from PIL import Image

from .geometry import BoundingBox, clamp_box

log = logging.getLogger(__name__)

CROP_SIZE = 512
NORMALIZE_MEANS = (0.485, 0.456, 0.406)
NORMALIZE_STDS = (0.229, 0.224, 0.225)


@dataclass(frozen=True)
class CropSample:
    pixels: np.ndarray  # crop_size x crop_size x 3, uint8
    boxes: Tuple[BoundingBox, ...]
    source_image_id: str
    resize_factor: float
    provenance: str  # "random_crop" or "box_guided_crop"


@dataclass(frozen=True)
class AugmentConfig:
    flip_prob: float = 0.5
    rotate_choices: Tuple[int, ...] = (0, 90, 180, 270)
    gaussian_noise_sigma: float = 0.01  # stddev on the [0,1] scale
    brightness_contrast_prob: float = 0.5
    color_jitter_prob: float = 0.5
    normalize_means: Tuple[float, float, float] = NORMALIZE_MEANS
    normalize_stds: Tuple[float, float, float] = NORMALIZE_STDS
    # Replacement hook for externally defined photometric effects
    # (emboss, snow, fog, sepia); default is a no-op.
    extra_photometric: Optional[Callable[[np.ndarray, np.random.Generator],
                                         np.ndarray]] = None

    def __post_init__(self) -> None:
        for name in ("flip_prob", "brightness_contrast_prob",
                     "color_jitter_prob"):
            p = getattr(self, name)
            if not (0.0 <= p <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.gaussian_noise_sigma < 0:
            raise ValueError("gaussian_noise_sigma must be >= 0")
        if any(r % 90 for r in self.rotate_choices):
            raise ValueError("rotate_choices must be multiples of 90")


def split_train_val(image_ids: Sequence[str], val_fraction: float = 0.10,
                    seed: int = 0) -> Tuple[List[str], List[str]]:
    """Deterministic shuffle split with |val| = round(val_fraction * n).

    The split depends only on the id set and seed, not on input order.
    """
    if not (0.0 < val_fraction < 1.0):
        raise ValueError("val_fraction must lie in (0, 1)")
    ids = sorted(set(image_ids))
    n = len(ids)
    if n < 2:
        raise ValueError("need at least 2 image ids to split")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    n_val = round(val_fraction * n)
    shuffled = [ids[i] for i in order]
    return shuffled[n_val:], shuffled[:n_val]


def _resize_by(pixels: np.ndarray, factor: float) -> Tuple[np.ndarray, float, float]:
    """Bilinear rescale by one factor on both axes; returns the actual
    per-axis scale after rounding to whole pixels."""
    height, width = pixels.shape[:2]
    new_w = max(1, round(width * factor))
    new_h = max(1, round(height * factor))
    img = Image.fromarray(pixels).resize((new_w, new_h), Image.BILINEAR)
    return np.asarray(img), new_w / width, new_h / height


def _box_fits(box: BoundingBox, crop_size: int) -> bool:
    return (math.ceil(box.x2) - math.floor(box.x) <= crop_size
            and math.ceil(box.y2) - math.floor(box.y) <= crop_size)


def _containing_origin(box: BoundingBox, crop_size: int, width: int,
                       height: int, rng: np.random.Generator) -> Tuple[int, int]:
    """Uniform crop origin among all placements fully containing the box."""
    x_lo = max(0, math.ceil(box.x2) - crop_size)
    x_hi = min(math.floor(box.x), width - crop_size)
    y_lo = max(0, math.ceil(box.y2) - crop_size)
    y_hi = min(math.floor(box.y), height - crop_size)
    return (int(rng.integers(x_lo, x_hi + 1)),
            int(rng.integers(y_lo, y_hi + 1)))


def sample_crop(pixels: np.ndarray, boxes: Sequence[BoundingBox],
                rng: np.random.Generator, source_image_id: str = "",
                crop_size: int = CROP_SIZE,
                max_resize_attempts: int = 10) -> Optional[CropSample]:
    """Draw one crop sample; None when the sample must be skipped.

    Skips happen when the rescaled image is smaller than the crop, or when
    a selected box stays larger than the crop after max_resize_attempts
    redraws of the resize factor.
    """
    factor = float(rng.uniform(0.7, 1.1))
    resized, sx, sy = _resize_by(pixels, factor)
    height, width = resized.shape[:2]
    if width < crop_size or height < crop_size:
        log.info("skipping %s: %dx%d smaller than crop after resize by %.3f",
                 source_image_id, width, height, factor)
        return None
    scaled = [BoundingBox(b.x * sx, b.y * sy, b.w * sx, b.h * sy)
              for b in boxes]

    if not boxes or rng.random() < 0.5:
        provenance = "random_crop"
        x0 = int(rng.integers(0, width - crop_size + 1))
        y0 = int(rng.integers(0, height - crop_size + 1))
    else:
        provenance = "box_guided_crop"
        pick = int(rng.integers(0, len(boxes)))
        attempts = 0
        # Redraws of the resize factor keep the selected box; a redraw
        # that shrinks the image below the crop also counts as failed.
        while (width < crop_size or height < crop_size
               or not _box_fits(scaled[pick], crop_size)):
            attempts += 1
            if attempts > max_resize_attempts:
                log.info("skipping %s: box %d does not fit the crop after %d"
                         " resize attempts", source_image_id, pick, attempts - 1)
                return None
            factor = float(rng.uniform(0.7, 1.1))
            resized, sx, sy = _resize_by(pixels, factor)
            height, width = resized.shape[:2]
            scaled = [BoundingBox(b.x * sx, b.y * sy, b.w * sx, b.h * sy)
                      for b in boxes]
        x0, y0 = _containing_origin(scaled[pick], crop_size, width, height, rng)

    crop = resized[y0:y0 + crop_size, x0:x0 + crop_size]
    kept = []
    for scaled_box in scaled:
        local = scaled_box.translated(-x0, -y0)
        clipped = clamp_box(local, crop_size, crop_size)
        if clipped is None:
            continue
        if clipped.area / scaled_box.area < 0.25:
            continue  # sliver left by the crop edge
        kept.append(clipped)
    return CropSample(pixels=np.ascontiguousarray(crop), boxes=tuple(kept),
                      source_image_id=source_image_id, resize_factor=factor,
                      provenance=provenance)


def _flip_lr(boxes: Sequence[BoundingBox], size: int) -> List[BoundingBox]:
    return [replace(b, x=size - b.x - b.w) for b in boxes]


def _flip_ud(boxes: Sequence[BoundingBox], size: int) -> List[BoundingBox]:
    return [replace(b, y=size - b.y - b.h) for b in boxes]


def rotate90_box(box: BoundingBox, size: int) -> BoundingBox:
    """One counter-clockwise quarter turn: (x,y,w,h) -> (y, size-x-w, h, w)."""
    return BoundingBox(box.y, size - box.x - box.w, box.h, box.w,
                       frame=box.frame)


def augment(sample: CropSample, cfg: AugmentConfig,
            rng: np.random.Generator) -> CropSample:
    """Random flip, quarter-turn rotation, and photometric perturbations.

    Geometric steps transform boxes alongside pixels; photometric steps
    clamp to the valid pixel range. gaussian_noise_sigma == 0 leaves
    pixels bit-identical.
    """
    pixels = sample.pixels
    boxes = list(sample.boxes)
    size = pixels.shape[0]

    if rng.random() < cfg.flip_prob:
        if rng.integers(0, 2) == 0:
            pixels = pixels[:, ::-1]
            boxes = _flip_lr(boxes, size)
        else:
            pixels = pixels[::-1, :]
            boxes = _flip_ud(boxes, size)

    degrees = int(cfg.rotate_choices[int(rng.integers(0, len(cfg.rotate_choices)))])
    for _ in range((degrees // 90) % 4):
        pixels = np.rot90(pixels)
        boxes = [rotate90_box(b, size) for b in boxes]

    values = pixels.astype(np.float64) / 255.0
    if cfg.gaussian_noise_sigma > 0:
        values = values + rng.normal(0.0, cfg.gaussian_noise_sigma,
                                     size=values.shape)
    if rng.random() < cfg.brightness_contrast_prob:
        contrast = rng.uniform(0.8, 1.2)
        brightness = rng.uniform(-0.2, 0.2)
        values = (values - 0.5) * contrast + 0.5 + brightness
    if rng.random() < cfg.color_jitter_prob:
        gains = rng.uniform(0.9, 1.1, size=3)
        values = values * gains
    out = np.clip(values * 255.0, 0, 255).round().astype(np.uint8)
    out = np.ascontiguousarray(out)
    if cfg.extra_photometric is not None:
        out = cfg.extra_photometric(out, rng)
    return replace(sample, pixels=out, boxes=tuple(boxes))


def normalize(pixels01: np.ndarray,
              means: Tuple[float, float, float] = NORMALIZE_MEANS,
              stds: Tuple[float, float, float] = NORMALIZE_STDS) -> np.ndarray:
    """Per-channel standardization of an RGB array scaled to [0, 1]."""
    return (pixels01 - np.asarray(means)) / np.asarray(stds)


def denormalize(values: np.ndarray,
                means: Tuple[float, float, float] = NORMALIZE_MEANS,
                stds: Tuple[float, float, float] = NORMALIZE_STDS) -> np.ndarray:
    return values * np.asarray(stds) + np.asarray(means)


def sample_rng(seed: int, sample_index: int) -> np.random.Generator:
    """Independent stream per sample so worker scheduling cannot change
    outputs."""
    return np.random.default_rng([seed, sample_index])


def write_sample(out_dir: Path, split: str, sample_id: str,
                 sample: CropSample) -> None:
    """Emit crops/{split}/{sample_id}.png plus its box sidecar."""
    split_dir = Path(out_dir) / split
    split_dir.mkdir(parents=True, exist_ok=True)
    Image.fromarray(sample.pixels).save(split_dir / f"{sample_id}.png")
    doc = {
        "boxes": [[b.x, b.y, b.w, b.h] for b in sample.boxes],
        "source_image_id": sample.source_image_id,
        "resize_factor": sample.resize_factor,
    }
    with open(split_dir / f"{sample_id}.json", "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


@dataclass
class PrepSummary:
    written: int = 0
    skipped: int = 0
    skipped_images: List[str] = field(default_factory=list)


def prep_training_set(images: Sequence[Tuple[str, Path, List[BoundingBox]]],
                      out_dir: Path, seed: int = 0,
                      samples_per_image: int = 1,
                      val_fraction: float = 0.10,
                      augment_cfg: Optional[AugmentConfig] = None
                      ) -> PrepSummary:
    """Generate the crop corpus for (image_id, path, gt boxes) triples."""
    cfg = augment_cfg if augment_cfg is not None else AugmentConfig()
    ids = [image_id for image_id, _, _ in images]
    train_ids, val_ids = split_train_val(ids, val_fraction, seed)
    split_of = {i: "train" for i in train_ids}
    split_of.update({i: "val" for i in val_ids})
    summary = PrepSummary()
    sample_index = 0
    for image_id, path, boxes in images:
        pixels = np.asarray(Image.open(path).convert("RGB"))
        for k in range(samples_per_image):
            rng = sample_rng(seed, sample_index)
            sample_index += 1
            sample = sample_crop(pixels, boxes, rng, source_image_id=image_id)
            if sample is None:
                summary.skipped += 1
                summary.skipped_images.append(image_id)
                continue
            sample = augment(sample, cfg, rng)
            write_sample(Path(out_dir), split_of[image_id],
                         f"{image_id.replace('/', '_')}-{k:04d}", sample)
            summary.written += 1
    return summary
