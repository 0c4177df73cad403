"""Corpus scanning: enumerate photos, sample video frames at a fixed rate,
attach metadata, and emit a deterministic manifest plus census statistics.

Video decoding is delegated. A video `clip.mp4` is represented by a frame
directory `clip.mp4.frames/` holding `frame_000000.png, frame_000001.png,
...` extracted at the manifest sample rate (frame k is at t = k/rate), and
an optional sidecar `clip.mp4.duration` holding the duration in seconds.
When the frame directory is missing and the environment variable
SARTRIAGE_FRAME_CMD is set (placeholders {input} {rate} {outdir}), the
scanner invokes it to create the directory. Without either, the video is
skipped and logged.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
import shlex
import subprocess
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from math import floor
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from .exif import ImageMeta, MetadataError, read_metadata

log = logging.getLogger(__name__)

FRAME_CMD_ENV = "SARTRIAGE_FRAME_CMD"
FRAME_DIR_SUFFIX = ".frames"
DURATION_SUFFIX = ".duration"
DEFAULT_SAMPLE_RATE_HZ = 2.0


@dataclass(frozen=True)
class ImageRecord:
    id: str
    source_path: str  # relative to the manifest root
    source_kind: str  # "photo" | "video_frame"
    parent_video: Optional[str]
    frame_time_s: Optional[float]
    width_px: int
    height_px: int
    gps: Optional[Tuple[float, float]]
    captured_at: Optional[str]


@dataclass
class CorpusManifest:
    records: List[ImageRecord]
    sample_rate_hz: float
    created_at: str
    root: str


@dataclass(frozen=True)
class VideoInfo:
    path: str  # relative to the manifest root
    duration_s: float
    native_resolution: Tuple[int, int]


@dataclass
class ScanConfig:
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ
    photo_extensions: Tuple[str, ...] = (".jpg", ".jpeg", ".png")
    video_extensions: Tuple[str, ...] = (".mp4", ".mov", ".avi", ".mts")
    sidecar_csv: Optional[str] = None
    frame_cmd: Optional[str] = None  # falls back to SARTRIAGE_FRAME_CMD
    workers: int = 1


@dataclass
class ScanResult:
    manifest: CorpusManifest
    videos: List[VideoInfo]
    skipped: List[Tuple[str, str]] = field(default_factory=list)  # (path, reason)


def _record_id(rel_path: str, frame_time_s: Optional[float]) -> str:
    key = rel_path if frame_time_s is None else f"{rel_path}#t={frame_time_s:.6f}"
    return "img-" + hashlib.sha1(key.encode()).hexdigest()[:16]


def _sort_key(rec: ImageRecord):
    return (rec.source_path, -1.0 if rec.frame_time_s is None else rec.frame_time_s)


def load_sidecar_csv(path: str) -> Dict[str, Tuple[Optional[float], Optional[float], Optional[str]]]:
    """Sidecar columns: path,lat,lon,captured_at (header row required)."""
    table: Dict[str, Tuple[Optional[float], Optional[float], Optional[str]]] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            lat = float(row["lat"]) if row.get("lat") else None
            lon = float(row["lon"]) if row.get("lon") else None
            table[row["path"]] = (lat, lon, row.get("captured_at") or None)
    return table


def scan_corpus(root: str, config: Optional[ScanConfig] = None) -> ScanResult:
    """Walk `root` and build the manifest. Unreadable root is fatal;
    individual corrupt files are skipped with a logged reason."""
    config = config or ScanConfig()
    root_path = Path(root)
    if not root_path.is_dir():
        raise FileNotFoundError(f"corpus root not readable: {root}")

    sidecar = load_sidecar_csv(config.sidecar_csv) if config.sidecar_csv else {}
    photo_paths: List[Path] = []
    video_paths: List[Path] = []
    for dirpath, dirnames, filenames in os.walk(root_path):
        dirnames.sort()
        # frame directories belong to their parent video, not the photo census
        dirnames[:] = [d for d in dirnames if not d.endswith(FRAME_DIR_SUFFIX)]
        for name in sorted(filenames):
            ext = Path(name).suffix.lower()
            full = Path(dirpath) / name
            if ext in config.photo_extensions:
                photo_paths.append(full)
            elif ext in config.video_extensions:
                video_paths.append(full)

    skipped: List[Tuple[str, str]] = []
    records: List[ImageRecord] = []
    videos: List[VideoInfo] = []

    def rel(p: Path) -> str:
        return p.relative_to(root_path).as_posix()

    def meta_for(p: Path) -> Optional[ImageMeta]:
        try:
            return read_metadata(p.read_bytes(), source=str(p))
        except (MetadataError, OSError) as exc:
            skipped.append((rel(p), str(exc)))
            log.warning("skipping %s: %s", p, exc)
            return None

    def apply_sidecar(rel_path: str, parent: Optional[str], meta: ImageMeta):
        row = sidecar.get(rel_path) or (parent and sidecar.get(parent))
        gps, captured = meta.gps, meta.captured_at
        if row:
            lat, lon, stamp = row
            if lat is not None and lon is not None:
                gps = (lat, lon)
            if stamp:
                captured = stamp
        return gps, captured

    workers = max(1, config.workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        photo_metas = list(pool.map(meta_for, photo_paths))

    for p, meta in zip(photo_paths, photo_metas):
        if meta is None:
            continue
        rel_path = rel(p)
        gps, captured = apply_sidecar(rel_path, None, meta)
        records.append(ImageRecord(
            id=_record_id(rel_path, None), source_path=rel_path,
            source_kind="photo", parent_video=None, frame_time_s=None,
            width_px=meta.width, height_px=meta.height,
            gps=gps, captured_at=captured))

    frame_cmd = config.frame_cmd or os.environ.get(FRAME_CMD_ENV)
    for vp in video_paths:
        video_rel = rel(vp)
        frame_dir = Path(str(vp) + FRAME_DIR_SUFFIX)
        if not frame_dir.is_dir():
            if not frame_cmd:
                skipped.append((video_rel, "no frame directory and no frame command"))
                log.warning("skipping %s: frames not extracted", vp)
                continue
            if not _run_frame_cmd(frame_cmd, vp, config.sample_rate_hz, frame_dir):
                skipped.append((video_rel, "frame extraction command failed"))
                continue

        frame_files = sorted(frame_dir.glob("frame_*.png"))
        if not frame_files:
            skipped.append((video_rel, "frame directory is empty"))
            continue

        duration = _video_duration(vp, len(frame_files), config.sample_rate_hz)
        n_frames = floor(duration * config.sample_rate_hz) + 1

        with ThreadPoolExecutor(max_workers=workers) as pool:
            frame_metas = list(pool.map(
                meta_for,
                (frame_dir / f"frame_{k:06d}.png" for k in range(n_frames))))

        native: Optional[Tuple[int, int]] = None
        for k, meta in enumerate(frame_metas):
            if meta is None:
                continue  # already logged as skipped
            if native is None:
                native = (meta.width, meta.height)
            t = k / config.sample_rate_hz
            frame_rel = rel(frame_dir / f"frame_{k:06d}.png")
            gps, captured = apply_sidecar(frame_rel, video_rel, meta)
            records.append(ImageRecord(
                id=_record_id(frame_rel, t), source_path=frame_rel,
                source_kind="video_frame", parent_video=video_rel,
                frame_time_s=t, width_px=meta.width, height_px=meta.height,
                gps=gps, captured_at=captured))
        videos.append(VideoInfo(path=video_rel, duration_s=duration,
                                native_resolution=native or (0, 0)))

    records.sort(key=_sort_key)
    manifest = CorpusManifest(
        records=records,
        sample_rate_hz=config.sample_rate_hz,
        created_at=datetime.now(timezone.utc).isoformat(),
        root=str(root_path),
    )
    return ScanResult(manifest=manifest, videos=videos, skipped=skipped)


def _run_frame_cmd(template: str, video: Path, rate: float, outdir: Path) -> bool:
    outdir.mkdir(parents=True, exist_ok=True)
    cmd = [part.format(input=str(video), rate=rate, outdir=str(outdir))
           for part in shlex.split(template)]
    try:
        subprocess.run(cmd, check=True, capture_output=True)
        return True
    except (subprocess.CalledProcessError, OSError) as exc:
        log.warning("frame extraction failed for %s: %s", video, exc)
        return False


def _video_duration(video: Path, frame_count: int, rate: float) -> float:
    sidecar = Path(str(video) + DURATION_SUFFIX)
    if sidecar.is_file():
        try:
            return max(0.0, float(sidecar.read_text().strip()))
        except ValueError:
            log.warning("unparsable duration sidecar %s; inferring from frames", sidecar)
    return (frame_count - 1) / rate


# -- census statistics --------------------------------------------------------

def resolution_census(manifest: CorpusManifest) -> Dict[Tuple[int, int], int]:
    """Tally of (width, height) over records, ordered by descending count
    then by (w, h)."""
    counts: Dict[Tuple[int, int], int] = {}
    for rec in manifest.records:
        key = (rec.width_px, rec.height_px)
        counts[key] = counts.get(key, 0) + 1
    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return dict(ordered)


def runtime_census(videos: List[VideoInfo], bin_width_s: float) -> Dict[int, int]:
    """Histogram of video durations; duration d lands in bin floor(d/width)."""
    if bin_width_s <= 0:
        raise ValueError("bin_width_s must be positive")
    bins: Dict[int, int] = {}
    for v in videos:
        b = floor(v.duration_s / bin_width_s)
        bins[b] = bins.get(b, 0) + 1
    return dict(sorted(bins.items()))


# -- manifest serialization ----------------------------------------------------

def manifest_to_dict(manifest: CorpusManifest) -> dict:
    return {
        "version": 1,
        "root": manifest.root,
        "sample_rate_hz": manifest.sample_rate_hz,
        "created_at": manifest.created_at,
        "records": [
            {
                "id": r.id,
                "source_path": r.source_path,
                "source_kind": r.source_kind,
                "parent_video": r.parent_video,
                "frame_time_s": r.frame_time_s,
                "width_px": r.width_px,
                "height_px": r.height_px,
                "gps": None if r.gps is None else {"lat": r.gps[0], "lon": r.gps[1]},
                "captured_at": r.captured_at,
            }
            for r in manifest.records
        ],
    }


def manifest_from_dict(doc: dict) -> CorpusManifest:
    records = [
        ImageRecord(
            id=r["id"],
            source_path=r["source_path"],
            source_kind=r["source_kind"],
            parent_video=r.get("parent_video"),
            frame_time_s=r.get("frame_time_s"),
            width_px=r["width_px"],
            height_px=r["height_px"],
            gps=None if r.get("gps") is None else (r["gps"]["lat"], r["gps"]["lon"]),
            captured_at=r.get("captured_at"),
        )
        for r in doc["records"]
    ]
    return CorpusManifest(records=records,
                          sample_rate_hz=doc["sample_rate_hz"],
                          created_at=doc.get("created_at", ""),
                          root=doc["root"])


def write_manifest(manifest: CorpusManifest, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(manifest_to_dict(manifest), fh, indent=1)
        fh.write("\n")


def read_manifest(path: str) -> CorpusManifest:
    with open(path) as fh:
        return manifest_from_dict(json.load(fh))


def record_image_path(manifest: CorpusManifest, record: ImageRecord) -> Path:
    return Path(manifest.root) / record.source_path


def write_videos(videos: List[VideoInfo], path: str) -> None:
    doc = {"version": 1, "videos": [
        {"path": v.path, "duration_s": v.duration_s,
         "native_resolution": list(v.native_resolution)} for v in videos]}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def read_videos(path: str) -> List[VideoInfo]:
    with open(path) as fh:
        doc = json.load(fh)
    return [VideoInfo(path=v["path"], duration_s=v["duration_s"],
                      native_resolution=tuple(v["native_resolution"]))
            for v in doc["videos"]]
