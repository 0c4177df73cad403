"""Axis-aligned pixel rectangles shared by the detection, evaluation and
triage stages.

A box covers the half-open region [x, x+w) x [y, y+h). Coordinates are
floats; `frame` records whether they are tile-local or image-global.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Optional


@dataclass(frozen=True)
class BoundingBox:
    x: float
    y: float
    w: float
    h: float
    frame: str = "image"  # "tile" or "image"

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    @property
    def area(self) -> float:
        return self.w * self.h

    def contains(self, other: "BoundingBox") -> bool:
        return (self.x <= other.x and self.y <= other.y
                and self.x2 >= other.x2 and self.y2 >= other.y2)

    def translated(self, dx: float, dy: float, frame: Optional[str] = None) -> "BoundingBox":
        return replace(self, x=self.x + dx, y=self.y + dy,
                       frame=self.frame if frame is None else frame)


def intersection_area(a: BoundingBox, b: BoundingBox) -> float:
    iw = min(a.x2, b.x2) - max(a.x, b.x)
    ih = min(a.y2, b.y2) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return 0.0
    return iw * ih


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union; 0 when the union is degenerate."""
    inter = intersection_area(a, b)
    union = a.area + b.area - inter
    if union <= 0:
        return 0.0
    return inter / union


def overlaps(a: BoundingBox, b: BoundingBox) -> bool:
    """Strictly positive shared area; touching edges do not count."""
    return intersection_area(a, b) > 0


def enclose(boxes: Iterable[BoundingBox]) -> BoundingBox:
    """Tight hull of one or more boxes. Frame is taken from the first box."""
    boxes = list(boxes)
    if not boxes:
        raise ValueError("enclose() needs at least one box")
    x0 = min(b.x for b in boxes)
    y0 = min(b.y for b in boxes)
    x1 = max(b.x2 for b in boxes)
    y1 = max(b.y2 for b in boxes)
    return BoundingBox(x0, y0, x1 - x0, y1 - y0, frame=boxes[0].frame)


def clamp_box(box: BoundingBox, width: float, height: float) -> Optional[BoundingBox]:
    """Clip a box to [0,width) x [0,height); None if nothing remains."""
    x0 = max(0.0, box.x)
    y0 = max(0.0, box.y)
    x1 = min(float(width), box.x2)
    y1 = min(float(height), box.y2)
    if x1 - x0 <= 0 or y1 - y0 <= 0:
        return None
    return BoundingBox(x0, y0, x1 - x0, y1 - y0, frame=box.frame)
