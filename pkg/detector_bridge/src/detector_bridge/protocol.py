"""The stdio side of the tile-detection adapter protocol.

Wire format (UTF-8, one JSON object per line, flushed per line):
  adapter -> orchestrator, first line:   {"protocol": 1, "capacity": N}
  orchestrator -> adapter, per tile:     {"tile_id": str, "image_path": str}
  adapter -> orchestrator, per tile:     {"tile_id": str, "boxes": [...]}

The loop is single-threaded and answers strictly in request order; a
capacity above 1 only tells the orchestrator it may keep that many
requests in flight (they queue in the pipe). Every request gets exactly
one response: unreadable tiles come back with empty boxes and an "error"
field rather than being dropped.
"""

from __future__ import annotations

import json
import logging
import sys
from dataclasses import dataclass
from typing import IO, Optional

import numpy as np
from PIL import Image

from .models import DetectorModel

log = logging.getLogger(__name__)

PROTOCOL_VERSION = 1


@dataclass
class AdapterConfig:
    model_path: Optional[str] = None
    score_floor: float = 0.0
    capacity: int = 1

    def __post_init__(self):
        if not (0.0 <= self.score_floor <= 1.0):
            raise ValueError("score_floor must be in [0, 1]")
        if self.capacity < 1:
            raise ValueError("capacity must be at least 1")


def _clean_box(raw: dict, score_floor: float) -> Optional[dict]:
    """Schema-conforming box or None when floored away.

    Scores are clamped into [0, 1] so a misbehaving model can degrade
    results but never break the wire contract.
    """
    score = float(raw["score"])
    if not (0.0 <= score <= 1.0):
        log.warning("clamping out-of-range score %s", score)
        score = min(1.0, max(0.0, score))
    if score < score_floor:
        return None
    return {"x": float(raw["x"]), "y": float(raw["y"]),
            "w": float(raw["w"]), "h": float(raw["h"]),
            "score": score, "label": str(raw.get("label", "person"))}


def _respond(stdout: IO[str], doc: dict) -> None:
    stdout.write(json.dumps(doc) + "\n")
    stdout.flush()


def serve_protocol(model: DetectorModel, config: AdapterConfig,
                   stdin: IO[str] = sys.stdin,
                   stdout: IO[str] = sys.stdout) -> None:
    """Answer requests from `stdin` on `stdout` until EOF."""
    _respond(stdout, {"protocol": PROTOCOL_VERSION,
                      "capacity": config.capacity})
    for line in stdin:
        if not line.strip():
            continue
        try:
            request = json.loads(line)
            tile_id = str(request["tile_id"])
            image_path = request["image_path"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            log.warning("unparseable request %r: %s", line, exc)
            _respond(stdout, {"tile_id": "", "boxes": [],
                              "error": f"unparseable request: {exc}"})
            continue
        try:
            pixels = np.asarray(Image.open(image_path).convert("RGB"))
        except (OSError, ValueError) as exc:
            _respond(stdout, {"tile_id": tile_id, "boxes": [],
                              "error": str(exc)})
            continue
        boxes = [clean for raw in model.detect(pixels)
                 if (clean := _clean_box(raw, config.score_floor)) is not None]
        _respond(stdout, {"tile_id": tile_id, "boxes": boxes})
