"""Detection models servable over the adapter protocol.

A model maps an RGB tile to box dicts with keys x, y, w, h, score, label,
in tile pixel coordinates. Real runtimes implement DetectorModel and are
constructed by whatever loads their weights; the bundled models exist so
the protocol layer and the orchestrator integration can be exercised
without any ML dependency.
"""

from __future__ import annotations

from collections import deque
from typing import Dict, List, Optional, Protocol

import numpy as np

MAGENTA = (255, 0, 255)


class ModelLoadError(Exception):
    """The requested model cannot be constructed."""


class DetectorModel(Protocol):
    def detect(self, pixels: np.ndarray) -> List[Dict]:
        """RGB uint8 (H, W, 3) tile -> box dicts in tile coordinates."""
        ...


class NullModel:
    """Finds nothing; the protocol-plumbing baseline."""

    def detect(self, pixels: np.ndarray) -> List[Dict]:
        return []


class MagentaStubModel:
    """Boxes around 4-connected components of saturated magenta pixels.

    Mirrors the orchestrator's built-in synthetic detector so end-to-end
    runs through a real subprocess produce the same detections.
    """

    def detect(self, pixels: np.ndarray) -> List[Dict]:
        pixels = np.asarray(pixels)
        hit = np.all(pixels == np.array(MAGENTA, dtype=pixels.dtype), axis=-1)
        boxes = []
        for x0, y0, x1, y1 in _component_bounds(hit):
            boxes.append({"x": float(x0), "y": float(y0),
                          "w": float(x1 - x0), "h": float(y1 - y0),
                          "score": 1.0, "label": "person"})
        boxes.sort(key=lambda b: (b["x"], b["y"]))
        return boxes


def _component_bounds(mask: np.ndarray) -> List[tuple]:
    """(x0, y0, x1, y1) exclusive bounds of each 4-connected component."""
    height, width = mask.shape
    seen = np.zeros_like(mask, dtype=bool)
    bounds = []
    for sy, sx in zip(*np.nonzero(mask)):
        if seen[sy, sx]:
            continue
        x0 = x1 = int(sx)
        y0 = y1 = int(sy)
        frontier = deque([(int(sy), int(sx))])
        seen[sy, sx] = True
        while frontier:
            y, x = frontier.popleft()
            x0, x1 = min(x0, x), max(x1, x)
            y0, y1 = min(y0, y), max(y1, y)
            for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
                if (0 <= ny < height and 0 <= nx < width
                        and mask[ny, nx] and not seen[ny, nx]):
                    seen[ny, nx] = True
                    frontier.append((ny, nx))
        bounds.append((x0, y0, x1 + 1, y1 + 1))
    return bounds


def load_model(model_path: Optional[str]) -> DetectorModel:
    """Construct the model named by `model_path`.

    None or "null" is the bundled empty model and "magenta" the bundled
    stub; anything else is treated as a weights path, for which no
    runtime is bundled.
    """
    if model_path in (None, "", "null"):
        return NullModel()
    if model_path == "magenta":
        return MagentaStubModel()
    raise ModelLoadError(
        f"no bundled runtime can load {model_path!r}; implement "
        "DetectorModel for your framework and serve it with serve_protocol")
