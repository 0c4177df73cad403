"""Tiled detection orchestration.

High-resolution images are covered by a regular grid of square tiles, a
pluggable detector backend runs per tile, within-tile boxes are combined by
weighted box fusion, results are projected into image coordinates, and
overlapping boxes from adjacent tiles are merged into their tight enclosing
box. Detections below the confidence threshold are dropped after merging.

Stage order: tile -> detect -> WBF per tile -> project -> merge across
tiles -> threshold -> truncate.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .backends import BackendUnavailable, RawBox
from .geometry import BoundingBox, clamp_box, enclose, iou, overlaps

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TileRect:
    index: int
    x: int
    y: int
    size: int = 512


@dataclass(frozen=True)
class Detection:
    box: BoundingBox
    score: float
    label: str = "person"
    tile_index: Optional[int] = None
    contributors: int = 1


@dataclass(frozen=True)
class DetectConfig:
    tile_size: int = 512
    tile_overlap: int = 0
    wbf_iou: float = 0.55
    confidence_threshold: float = 0.5
    max_detections_per_image: int = 100

    def __post_init__(self) -> None:
        if not (0 <= self.tile_overlap < self.tile_size):
            raise ValueError("tile_overlap must satisfy 0 <= overlap < tile_size")
        if not (0.0 < self.wbf_iou < 1.0):
            raise ValueError("wbf_iou must lie in (0, 1)")
        if not (0.0 <= self.confidence_threshold <= 1.0):
            raise ValueError("confidence_threshold must lie in [0, 1]")
        if self.max_detections_per_image < 1:
            raise ValueError("max_detections_per_image must be positive")


@dataclass
class DetectResult:
    image_id: str
    detections: List[Detection] = field(default_factory=list)
    is_candidate: bool = False
    error: Optional[str] = None


def _axis_offsets(extent: int, tile_size: int, stride: int) -> List[int]:
    if extent <= tile_size:
        return [0]
    offsets = list(range(0, extent - tile_size + 1, stride))
    if offsets[-1] != extent - tile_size:
        # Final tile shifted back so it ends exactly at the image edge.
        offsets.append(extent - tile_size)
    return offsets


def tile_grid(width: int, height: int, tile_size: int = 512,
              overlap: int = 0) -> List[TileRect]:
    """Row-major grid of tiles covering every pixel of the image."""
    stride = tile_size - overlap
    xs = _axis_offsets(width, tile_size, stride)
    ys = _axis_offsets(height, tile_size, stride)
    tiles = []
    for y in ys:
        for x in xs:
            tiles.append(TileRect(index=len(tiles), x=x, y=y, size=tile_size))
    return tiles


def tile_pixels(pixels: np.ndarray, tile: TileRect) -> np.ndarray:
    """Crop one tile; images smaller than the tile are edge-replicated."""
    crop = pixels[tile.y:tile.y + tile.size, tile.x:tile.x + tile.size]
    pad_y = tile.size - crop.shape[0]
    pad_x = tile.size - crop.shape[1]
    if pad_y or pad_x:
        crop = np.pad(crop, ((0, pad_y), (0, pad_x)) + ((0, 0),) * (crop.ndim - 2),
                      mode="edge")
    return crop


def run_detector(image_id: str, tiles: Sequence[Tuple[TileRect, np.ndarray]],
                 backend) -> Dict[int, List[Detection]]:
    """Invoke the backend on every tile; results keyed by tile index.

    Boxes are clipped to the tile extent; boxes left with no area are
    dropped.
    """
    requests = [(f"{image_id}:{tile.index}", crop) for tile, crop in tiles]
    raw = backend.detect(requests)
    out: Dict[int, List[Detection]] = {}
    for (tile, _), (tile_id, _) in zip(tiles, requests):
        dets = []
        for box in raw.get(tile_id, []):
            clipped = clamp_box(
                BoundingBox(box.x, box.y, box.w, box.h, frame="tile"),
                tile.size, tile.size)
            if clipped is None:
                log.debug("dropping zero-area box on tile %s", tile_id)
                continue
            dets.append(Detection(box=clipped, score=box.score,
                                  label=box.label, tile_index=tile.index))
        out[tile.index] = dets
    return out


def weighted_box_fusion(dets: Sequence[Detection],
                        iou_threshold: float = 0.55) -> List[Detection]:
    """Fuse boxes in one frame by score-weighted coordinate averaging.

    Boxes are taken in descending-score order and joined to the first
    existing group whose running fused box has IoU >= iou_threshold; the
    fused corner coordinates are score-weighted means of the members and
    the fused score is the plain mean.
    """
    ordered = sorted(dets, key=lambda d: (-d.score, d.box.x, d.box.y,
                                          d.box.w, d.box.h))
    groups: List[List[Detection]] = []
    fused: List[Detection] = []
    for det in ordered:
        for gi, current in enumerate(fused):
            if iou(det.box, current.box) >= iou_threshold:
                groups[gi].append(det)
                fused[gi] = _fuse_group(groups[gi])
                break
        else:
            groups.append([det])
            fused.append(_fuse_group([det]))
    return fused


def _fuse_group(members: Sequence[Detection]) -> Detection:
    if len(members) == 1:
        return members[0]  # exact identity, no float round-trip
    scores = np.array([m.score for m in members])
    total = scores.sum()
    x1 = float(np.dot(scores, [m.box.x for m in members]) / total)
    y1 = float(np.dot(scores, [m.box.y for m in members]) / total)
    x2 = float(np.dot(scores, [m.box.x2 for m in members]) / total)
    y2 = float(np.dot(scores, [m.box.y2 for m in members]) / total)
    first = members[0]
    return Detection(
        box=BoundingBox(x1, y1, x2 - x1, y2 - y1, frame=first.box.frame),
        score=float(scores.mean()), label=first.label,
        tile_index=first.tile_index,
        contributors=sum(m.contributors for m in members))


def project_to_image(dets: Iterable[Detection], tiles: Sequence[TileRect],
                     image_width: int, image_height: int) -> List[Detection]:
    """Translate tile-frame detections by their tile offset and clamp to
    the image; raises ValueError for a tile_index not in `tiles`."""
    by_index = {t.index: t for t in tiles}
    out = []
    for det in dets:
        if det.tile_index not in by_index:
            raise ValueError(f"detection references unknown tile index "
                             f"{det.tile_index!r}")
        tile = by_index[det.tile_index]
        moved = det.box.translated(tile.x, tile.y, frame="image")
        clipped = clamp_box(moved, image_width, image_height)
        if clipped is None:
            continue  # box fell entirely in replicated padding
        out.append(replace(det, box=clipped))
    return out


def merge_overlapping(dets: Sequence[Detection]) -> List[Detection]:
    """Replace each connected component of the strict-overlap graph with
    its tight enclosing box; iterate until no two boxes overlap.

    Merged score is the max of the members; contributors accumulate.
    Touching edges (zero shared area) do not connect boxes.
    """
    current = list(dets)
    while True:
        n = len(current)
        parent = list(range(n))

        def find(i: int) -> int:
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        merged_any = False
        for i in range(n):
            for j in range(i + 1, n):
                if overlaps(current[i].box, current[j].box):
                    ri, rj = find(i), find(j)
                    if ri != rj:
                        parent[max(ri, rj)] = min(ri, rj)
                        merged_any = True
        if not merged_any:
            return current
        components: Dict[int, List[Detection]] = {}
        for i in range(n):
            components.setdefault(find(i), []).append(current[i])
        merged = []
        for root in sorted(components):
            members = components[root]
            if len(members) == 1:
                merged.append(members[0])
                continue
            best = max(members, key=lambda m: m.score)
            merged.append(Detection(
                box=enclose([m.box for m in members]),
                score=best.score, label=best.label, tile_index=None,
                contributors=sum(m.contributors for m in members)))
        current = merged


def detect_pipeline(image_id: str, pixels: np.ndarray, cfg: DetectConfig,
                    backend) -> DetectResult:
    """Run the full per-image pipeline.

    A backend crash or timeout is retried once (restarting the adapter
    when it supports it) before the error propagates.
    """
    height, width = pixels.shape[:2]
    tiles = tile_grid(width, height, cfg.tile_size, cfg.tile_overlap)
    crops = [(tile, tile_pixels(pixels, tile)) for tile in tiles]
    try:
        per_tile = run_detector(image_id, crops, backend)
    except BackendUnavailable as exc:
        log.warning("backend failed on %s (%s); retrying once", image_id, exc)
        if hasattr(backend, "restart"):
            backend.restart()
        per_tile = run_detector(image_id, crops, backend)

    projected: List[Detection] = []
    for tile in tiles:
        fused = weighted_box_fusion(per_tile.get(tile.index, []), cfg.wbf_iou)
        projected.extend(project_to_image(fused, tiles, width, height))
    merged = merge_overlapping(projected)
    kept = [d for d in merged if d.score >= cfg.confidence_threshold]
    kept.sort(key=lambda d: (-d.score, d.box.x, d.box.y, d.box.w, d.box.h))
    kept = kept[:cfg.max_detections_per_image]
    return DetectResult(image_id=image_id, detections=kept,
                        is_candidate=bool(kept))


def result_to_dict(result: DetectResult) -> dict:
    doc = {
        "image_id": result.image_id,
        "is_candidate": result.is_candidate,
        "detections": [
            {"x": d.box.x, "y": d.box.y, "w": d.box.w, "h": d.box.h,
             "score": d.score, "label": d.label,
             "contributors": d.contributors}
            for d in result.detections
        ],
    }
    if result.error is not None:
        doc["error"] = result.error
    return doc


def result_from_dict(doc: dict) -> DetectResult:
    dets = [
        Detection(
            box=BoundingBox(d["x"], d["y"], d["w"], d["h"], frame="image"),
            score=d["score"], label=d.get("label", "person"),
            contributors=d.get("contributors", 1))
        for d in doc.get("detections", [])
    ]
    return DetectResult(image_id=doc["image_id"], detections=dets,
                        is_candidate=doc.get("is_candidate", bool(dets)),
                        error=doc.get("error"))


def write_detections(path, results: Iterable[DetectResult]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for result in results:
            fh.write(json.dumps(result_to_dict(result)) + "\n")


def read_detections(path) -> List[DetectResult]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(result_from_dict(json.loads(line)))
    return out
