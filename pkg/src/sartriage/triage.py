"""Candidate review store: persistence, verdicts, crops, export.

Candidates produced by the anomaly and detection pipelines are persisted
in a zero-dependency store: an append-only JSON-lines verdict log plus a
rewritten-on-change snapshot of the candidate index. Candidate identity is
a content hash of (image_id, source, region), which makes re-ingestion of
the same pipeline outputs a no-op.

Recovery rule: a verdict line counts only when newline-terminated;
whatever trails the final newline is discarded as torn. Status is always
recomputed by replaying the surviving log over the snapshot.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import io
import json
import logging
import math
import os
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from PIL import Image, ImageDraw

from .geometry import BoundingBox
from .ingest import CorpusManifest

log = logging.getLogger(__name__)

DECISIONS = ("dismissed", "elevated", "unsure")
STATUSES = ("pending",) + DECISIONS
SOURCES = ("rx", "detect")
DEFAULT_PAGE_SIZE = 50


class UnknownCandidateError(KeyError):
    """Candidate id not present in the store."""


class SourceGoneError(Exception):
    """Candidate exists but its source image is no longer readable."""


@dataclass
class CandidateRecord:
    candidate_id: str
    image_id: str
    source: str  # "rx" | "detect"
    region: BoundingBox  # native image frame
    score: Optional[float]
    gps: Optional[Tuple[float, float]]
    status: str = "pending"
    created_at: str = ""


@dataclass(frozen=True)
class ReviewVerdict:
    candidate_id: str
    decision: str
    reviewer: str = ""
    notes: str = ""
    decided_at: str = ""


def candidate_id_for(image_id: str, source: str, region: BoundingBox) -> str:
    """Content hash identity; identical inputs always collide on purpose."""
    key = json.dumps([image_id, source, region.x, region.y,
                      region.w, region.h])
    return "cand-" + hashlib.sha1(key.encode("utf-8")).hexdigest()[:16]


def _now_iso() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def record_to_dict(record: CandidateRecord) -> dict:
    return {
        "candidate_id": record.candidate_id,
        "image_id": record.image_id,
        "source": record.source,
        "region": [record.region.x, record.region.y,
                   record.region.w, record.region.h],
        "score": record.score,
        "gps": (None if record.gps is None
                else {"lat": record.gps[0], "lon": record.gps[1]}),
        "status": record.status,
        "created_at": record.created_at,
    }


def record_from_dict(doc: dict) -> CandidateRecord:
    gps = doc.get("gps")
    region = doc["region"]
    return CandidateRecord(
        candidate_id=doc["candidate_id"], image_id=doc["image_id"],
        source=doc["source"],
        region=BoundingBox(region[0], region[1], region[2], region[3]),
        score=doc.get("score"),
        gps=None if gps is None else (gps["lat"], gps["lon"]),
        status=doc.get("status", "pending"),
        created_at=doc.get("created_at", ""))


class CandidateStore:
    """Durable candidate index with serialized writes.

    All mutation goes through one lock; readers see consistent in-memory
    state rebuilt at load time from snapshot + verdict-log replay.
    """

    def __init__(self, store_dir, images_root=None):
        self.store_dir = Path(store_dir)
        self.store_dir.mkdir(parents=True, exist_ok=True)
        self.images_root = None if images_root is None else Path(images_root)
        self.log_path = self.store_dir / "verdicts.log"
        self.snapshot_path = self.store_dir / "candidates.snapshot.json"
        self._lock = threading.RLock()
        self._candidates: Dict[str, CandidateRecord] = {}
        self._image_paths: Dict[str, str] = {}  # image_id -> relative path
        self._verdicts: List[ReviewVerdict] = []
        self._load()

    # -- persistence ----------------------------------------------------

    def _load(self) -> None:
        if self.snapshot_path.exists():
            with open(self.snapshot_path, encoding="utf-8") as fh:
                doc = json.load(fh)
            for raw in doc.get("candidates", []):
                record = record_from_dict(raw)
                record.status = "pending"  # replay decides, not the snapshot
                self._candidates[record.candidate_id] = record
            self._image_paths = dict(doc.get("image_paths", {}))
        for verdict in self._read_log():
            self._verdicts.append(verdict)
            record = self._candidates.get(verdict.candidate_id)
            if record is None:
                log.warning("verdict for unknown candidate %s ignored",
                            verdict.candidate_id)
                continue
            record.status = verdict.decision

    def _read_log(self) -> List[ReviewVerdict]:
        if not self.log_path.exists():
            return []
        data = self.log_path.read_bytes()
        if not data:
            return []
        pieces = data.split(b"\n")
        # The piece after the last newline is either empty or torn; the
        # torn fragment is discarded even when it happens to parse.
        pieces = pieces[:-1]
        out = []
        for piece in pieces:
            try:
                doc = json.loads(piece.decode("utf-8"))
                out.append(ReviewVerdict(
                    candidate_id=doc["candidate_id"],
                    decision=doc["decision"],
                    reviewer=doc.get("reviewer", ""),
                    notes=doc.get("notes", ""),
                    decided_at=doc.get("decided_at", "")))
            except (ValueError, KeyError, UnicodeDecodeError):
                log.warning("skipping malformed verdict line: %r", piece[:80])
        return out

    def _append_log(self, verdict: ReviewVerdict) -> None:
        line = json.dumps({
            "candidate_id": verdict.candidate_id,
            "decision": verdict.decision,
            "reviewer": verdict.reviewer,
            "notes": verdict.notes,
            "decided_at": verdict.decided_at,
        }) + "\n"
        with open(self.log_path, "a", encoding="utf-8") as fh:
            fh.write(line)
            fh.flush()
            os.fsync(fh.fileno())

    def _write_snapshot(self) -> None:
        doc = {
            "version": 1,
            "candidates": [record_to_dict(r)
                           for r in self._sorted_candidates()],
            "image_paths": self._image_paths,
        }
        tmp = self.snapshot_path.with_suffix(".tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, self.snapshot_path)

    # -- ingestion ------------------------------------------------------

    def ingest_candidates(self, manifest: CorpusManifest,
                          rx_results: Iterable[dict] = (),
                          detect_results: Iterable[dict] = ()) -> int:
        """Add one candidate per anomaly cluster (candidate images only)
        and per final detection; returns how many were new."""
        by_id = {record.id: record for record in manifest.records}
        added = 0
        with self._lock:
            for doc in rx_results:
                if not doc.get("is_candidate"):
                    continue
                for cluster in doc.get("clusters", []):
                    x, y, w, h = cluster["bbox_native"]
                    added += self._add(doc["image_id"], "rx",
                                       BoundingBox(x, y, w, h), None, by_id)
            for doc in detect_results:
                for det in doc.get("detections", []):
                    added += self._add(
                        doc["image_id"], "detect",
                        BoundingBox(det["x"], det["y"], det["w"], det["h"]),
                        det.get("score"), by_id)
            if added:
                self._write_snapshot()
        return added

    def _add(self, image_id: str, source: str, region: BoundingBox,
             score: Optional[float], by_id: Dict[str, object]) -> int:
        record = by_id.get(image_id)
        if record is None:
            log.warning("skipping candidate on unknown image %s", image_id)
            return 0
        cid = candidate_id_for(image_id, source, region)
        if cid in self._candidates:
            return 0
        self._candidates[cid] = CandidateRecord(
            candidate_id=cid, image_id=image_id, source=source,
            region=region, score=score, gps=record.gps,
            created_at=_now_iso())
        self._image_paths[image_id] = record.source_path
        return 1

    # -- queries --------------------------------------------------------

    def _sorted_candidates(self) -> List[CandidateRecord]:
        return sorted(self._candidates.values(),
                      key=lambda r: (r.created_at, r.candidate_id))

    def get(self, candidate_id: str) -> CandidateRecord:
        try:
            return self._candidates[candidate_id]
        except KeyError:
            raise UnknownCandidateError(candidate_id)

    def list_candidates(self, status: Optional[str] = None,
                        source: Optional[str] = None, page: int = 1,
                        page_size: int = DEFAULT_PAGE_SIZE
                        ) -> Tuple[List[CandidateRecord], int]:
        """One stable page plus the total match count."""
        if status is not None and status not in STATUSES:
            raise ValueError(f"unknown status filter {status!r}")
        if source is not None and source not in SOURCES:
            raise ValueError(f"unknown source filter {source!r}")
        if page < 1 or page_size < 1:
            raise ValueError("page and page_size must be >= 1")
        rows = [r for r in self._sorted_candidates()
                if (status is None or r.status == status)
                and (source is None or r.source == source)]
        start = (page - 1) * page_size
        return rows[start:start + page_size], len(rows)

    def get_candidate_crop(self, candidate_id: str,
                           context_px: int = 128) -> bytes:
        """PNG crop of the region grown by context_px, region outlined."""
        record = self.get(candidate_id)
        rel = self._image_paths.get(record.image_id)
        if rel is None or self.images_root is None:
            raise SourceGoneError(f"no image path for {record.image_id}")
        path = self.images_root / rel
        try:
            image = Image.open(path).convert("RGB")
        except (FileNotFoundError, OSError) as exc:
            raise SourceGoneError(f"cannot read {path}: {exc}")
        region = record.region
        x0 = max(0, math.floor(region.x) - context_px)
        y0 = max(0, math.floor(region.y) - context_px)
        x1 = min(image.width, math.ceil(region.x2) + context_px)
        y1 = min(image.height, math.ceil(region.y2) + context_px)
        crop = image.crop((x0, y0, x1, y1))
        draw = ImageDraw.Draw(crop)
        draw.rectangle([math.floor(region.x) - x0, math.floor(region.y) - y0,
                        math.ceil(region.x2) - 1 - x0,
                        math.ceil(region.y2) - 1 - y0],
                       outline=(255, 0, 0), width=2)
        buf = io.BytesIO()
        crop.save(buf, format="PNG")
        return buf.getvalue()

    # -- verdicts -------------------------------------------------------

    def record_verdict(self, verdict: ReviewVerdict) -> CandidateRecord:
        if verdict.decision not in DECISIONS:
            raise ValueError(f"unknown decision {verdict.decision!r}")
        with self._lock:
            record = self.get(verdict.candidate_id)
            if not verdict.decided_at:
                verdict = ReviewVerdict(
                    candidate_id=verdict.candidate_id,
                    decision=verdict.decision, reviewer=verdict.reviewer,
                    notes=verdict.notes, decided_at=_now_iso())
            self._append_log(verdict)
            self._verdicts.append(verdict)
            record.status = verdict.decision
            self._write_snapshot()
            return record

    def verdicts_for(self, candidate_id: str) -> List[ReviewVerdict]:
        return [v for v in self._verdicts if v.candidate_id == candidate_id]

    @property
    def verdict_count(self) -> int:
        return len(self._verdicts)

    # -- export and stats -----------------------------------------------

    def export_elevated(self) -> dict:
        """GeoJSON FeatureCollection of elevated candidates with GPS;
        elevated candidates without GPS go to the no_location array."""
        features = []
        no_location = []
        for record in self._sorted_candidates():
            if record.status != "elevated":
                continue
            properties = {
                "candidate_id": record.candidate_id,
                "image_id": record.image_id,
                "source": record.source,
                "score": record.score,
                "region": [record.region.x, record.region.y,
                           record.region.w, record.region.h],
            }
            if record.gps is None:
                no_location.append(properties)
                continue
            lat, lon = record.gps
            features.append({
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [lon, lat]},
                "properties": properties,
            })
        return {"type": "FeatureCollection", "features": features,
                "no_location": no_location}

    def stats(self) -> dict:
        by_status = {status: 0 for status in STATUSES}
        by_source = {source: 0 for source in SOURCES}
        for record in self._candidates.values():
            by_status[record.status] += 1
            by_source[record.source] += 1
        return {"total": len(self._candidates), "by_status": by_status,
                "by_source": by_source, "verdicts": len(self._verdicts)}


def ingest_candidates(store: CandidateStore, manifest: CorpusManifest,
                      rx_results: Iterable[dict] = (),
                      detect_results: Iterable[dict] = ()) -> int:
    return store.ingest_candidates(manifest, rx_results, detect_results)
