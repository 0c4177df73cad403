"""Corpus-level reporting across pipeline stages.

Aggregates the ingest censuses, per-stage candidate counts, a
confidence-threshold sweep over a detection dump, and throughput figures.
Per-stage throughput comes from the run summaries written next to each
stage's output when those are available; the report always times its own
pass so a positive images/sec figure is present even without them.
"""

from __future__ import annotations

import csv
import json
import logging
import time
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

from .ingest import CorpusManifest, VideoInfo, resolution_census, runtime_census

log = logging.getLogger(__name__)

DEFAULT_SWEEP = (0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)


def threshold_sweep(detect_results: Sequence[dict],
                    thresholds: Sequence[float] = DEFAULT_SWEEP) -> List[dict]:
    """Candidate-image count when re-thresholding an existing dump."""
    rows = []
    for threshold in thresholds:
        count = sum(
            1 for doc in detect_results
            if any(det["score"] >= threshold
                   for det in doc.get("detections", []))
        )
        rows.append({"threshold": threshold, "candidate_images": count})
    return rows


def load_run_summary(output_path) -> Optional[dict]:
    """Run summaries live at `<output>.run.json`."""
    path = Path(str(output_path) + ".run.json")
    if not path.exists():
        return None
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, ValueError) as exc:
        log.warning("unreadable run summary %s: %s", path, exc)
        return None


def _summary_throughput(summary: Optional[dict]) -> Optional[float]:
    if not summary:
        return None
    processed = summary.get("counts", {}).get("processed")
    duration = summary.get("duration_s")
    if not processed or not duration or duration <= 0:
        return None
    return processed / duration


def build_report(manifest: CorpusManifest,
                 videos: Sequence[VideoInfo] = (),
                 rx_results: Sequence[dict] = (),
                 detect_results: Sequence[dict] = (),
                 triage_stats: Optional[dict] = None,
                 thresholds: Sequence[float] = DEFAULT_SWEEP,
                 rx_summary: Optional[dict] = None,
                 detect_summary: Optional[dict] = None,
                 runtime_bin_s: float = 60.0) -> dict:
    started = time.monotonic()
    resolutions = resolution_census(manifest)
    runtimes = runtime_census(list(videos), runtime_bin_s)
    counts = {
        "images": len(manifest.records),
        "videos": len(videos),
        "rx_results": len(rx_results),
        "rx_candidates": sum(1 for d in rx_results if d.get("is_candidate")),
        "detect_results": len(detect_results),
        "detect_candidates": sum(
            1 for d in detect_results
            if d.get("is_candidate", bool(d.get("detections")))),
    }
    if triage_stats is not None:
        counts["triage"] = triage_stats
    elapsed = time.monotonic() - started
    examined = max(1, len(manifest.records))
    throughput = {
        "report_images_per_s": examined / max(elapsed, 1e-9),
    }
    rx_rate = _summary_throughput(rx_summary)
    if rx_rate is not None:
        throughput["rx_images_per_s"] = rx_rate
    detect_rate = _summary_throughput(detect_summary)
    if detect_rate is not None:
        throughput["detect_images_per_s"] = detect_rate
    return {
        "resolution_census": [
            {"width": w, "height": h, "count": c}
            for (w, h), c in resolutions.items()
        ],
        "runtime_census": [
            {"bin_start_s": b * runtime_bin_s, "count": c}
            for b, c in sorted(runtimes.items())
        ],
        "counts": counts,
        "threshold_sweep": threshold_sweep(detect_results, thresholds),
        "throughput": throughput,
    }


def write_report_json(path, report: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2)


def write_report_csv(path, report: dict) -> None:
    """Flat (section, key, value) rows covering every report table."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["section", "key", "value"])
        for row in report["resolution_census"]:
            writer.writerow(["resolution",
                             f"{row['width']}x{row['height']}", row["count"]])
        for row in report["runtime_census"]:
            writer.writerow(["runtime_bin_s", row["bin_start_s"],
                             row["count"]])
        for key, value in report["counts"].items():
            if isinstance(value, dict):
                continue  # nested triage stats stay in the JSON form
            writer.writerow(["counts", key, value])
        for row in report["threshold_sweep"]:
            writer.writerow(["threshold_sweep", row["threshold"],
                             row["candidate_images"]])
        for key, value in report["throughput"].items():
            writer.writerow(["throughput", key, value])
