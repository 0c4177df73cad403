"""Shared fixture builders for the test suite."""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Sequence, Tuple

import numpy as np
from PIL import Image
from PIL.TiffImagePlugin import IFDRational


def green_field(height: int, width: int, seed: int = 0,
                lo: int = 90, hi: int = 110) -> np.ndarray:
    """Grass-like background: green channel noise, red/blue near zero."""
    rng = np.random.default_rng(seed)
    img = np.zeros((height, width, 3), dtype=np.uint8)
    img[..., 1] = rng.integers(lo, hi, size=(height, width))
    return img


def add_patch(img: np.ndarray, x: int, y: int, w: int, h: int,
              color: Tuple[int, int, int]) -> np.ndarray:
    img[y:y + h, x:x + w] = color
    return img


def save_png(path, pixels: np.ndarray) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(pixels).save(path)
    return path


def _dms(value: float) -> Tuple[IFDRational, IFDRational, IFDRational]:
    degrees = int(value)
    minutes_float = (value - degrees) * 60
    minutes = int(minutes_float)
    seconds = (minutes_float - minutes) * 60
    return (IFDRational(degrees, 1), IFDRational(minutes, 1),
            IFDRational(int(round(seconds * 1000)), 1000))


def save_jpeg_with_gps(path, pixels: np.ndarray,
                       lat: Optional[float] = None,
                       lon: Optional[float] = None,
                       datetime_str: Optional[str] = None) -> Path:
    """Author a JPEG whose EXIF block Pillow itself can read back."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    img = Image.fromarray(pixels)
    exif = Image.Exif()
    if lat is not None and lon is not None:
        exif[0x8825] = {
            1: "N" if lat >= 0 else "S",
            2: _dms(abs(lat)),
            3: "E" if lon >= 0 else "W",
            4: _dms(abs(lon)),
        }
    if datetime_str is not None:
        exif[0x0132] = datetime_str  # DateTime in IFD0
    img.save(path, format="JPEG", exif=exif if len(exif) else None,
             quality=90)
    return path


def checkerboard(size: int = 512, cell: int = 32) -> np.ndarray:
    """Distinct asymmetric pattern for geometric-transform tests."""
    ys, xs = np.mgrid[0:size, 0:size]
    board = ((xs // cell + ys // cell) % 2 * 180).astype(np.uint8)
    img = np.stack([board, (xs % 256).astype(np.uint8),
                    (ys % 256).astype(np.uint8)], axis=-1)
    return img


def magenta_scene(height: int, width: int,
                  patches: Sequence[Tuple[int, int, int, int]],
                  seed: int = 0) -> np.ndarray:
    """Green background with saturated magenta rectangles."""
    img = green_field(height, width, seed=seed)
    for x, y, w, h in patches:
        add_patch(img, x, y, w, h, (255, 0, 255))
    return img
